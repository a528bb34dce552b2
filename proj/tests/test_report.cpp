#include <gtest/gtest.h>

#include "rednote/report.hpp"

using namespace rednote;

namespace {

Table sample() {
  Table t{"T", {"name", "value"}, {}, {"note one"}};
  t.add_row({Cell::text("a|b"), Cell::number(35.5612, 2)});
  t.add_row({Cell::text("x,y"), Cell::missing()});
  return t;
}

EntropyReport report_with_ppl(double ppl) {
  EntropyReport r;
  r.perplexity = ppl;
  r.cross_entropy_bits = std::log2(ppl);
  return r;
}

}  // namespace

TEST(Emit, CsvGolden) {
  EXPECT_EQ(emit(sample(), Format::csv), "name,value\r\na|b,35.56\r\n\"x,y\",–\r\n");
}

TEST(Emit, MarkdownGolden) {
  EXPECT_EQ(emit(sample(), Format::markdown),
            "### T\n"
            "\n"
            "| name | value |\n"
            "| --- | ---: |\n"
            "| a\\|b | 35.56 |\n"
            "| x,y | – |\n"
            "\n"
            "note one\n");
}

TEST(Emit, JsonGolden) {
  EXPECT_EQ(emit(sample(), Format::json),
            "{\n"
            "  \"columns\": [\n"
            "    \"name\",\n"
            "    \"value\"\n"
            "  ],\n"
            "  \"notes\": [\n"
            "    \"note one\"\n"
            "  ],\n"
            "  \"rows\": [\n"
            "    {\n"
            "      \"name\": \"a|b\",\n"
            "      \"value\": 35.56\n"
            "    },\n"
            "    {\n"
            "      \"name\": \"x,y\",\n"
            "      \"value\": null\n"
            "    }\n"
            "  ],\n"
            "  \"title\": \"T\"\n"
            "}\n");
}

TEST(Emit, EmptyTableKeepsHeaders) {
  const Table t{"Empty", {"a", "b"}, {}, {}};
  EXPECT_EQ(emit(t, Format::csv), "a,b\r\n");
  EXPECT_EQ(emit(t, Format::markdown), "### Empty\n\n| a | b |\n| --- | ---: |\n");
  const auto j = nlohmann::json::parse(emit(t, Format::json));
  EXPECT_TRUE(j["rows"].empty());
  EXPECT_EQ(j["columns"], (nlohmann::json{"a", "b"}));
}

TEST(Emit, RowWidthChecked) {
  Table t{"T", {"a", "b"}, {}, {}};
  EXPECT_THROW(t.add_row({Cell::text("x")}), Error);
}

TEST(Format, ParseNamesAndExtensions) {
  EXPECT_EQ(parse_format("csv"), Format::csv);
  EXPECT_EQ(parse_format("json"), Format::json);
  EXPECT_EQ(parse_format("md"), Format::markdown);
  EXPECT_EQ(parse_format("markdown"), Format::markdown);
  EXPECT_THROW(parse_format("xlsx"), ConfigError);
  EXPECT_EQ(format_extension(Format::markdown), "md");
  EXPECT_EQ(format_extension(Format::csv), "csv");
}

TEST(Cell, RenderingAndJson) {
  EXPECT_EQ(Cell::number(1.0 / 3, kScoreDecimals).render(), "0.33");
  EXPECT_EQ(Cell::number(std::log2(35.56), kBitsDecimals).render(), "5.152");
  EXPECT_EQ(Cell::count(42).render(), "42");
  EXPECT_EQ(Cell::number(std::optional<double>{}, 2).render(), "–");
  EXPECT_EQ(Cell::number(1.0 / 3, 2).to_json(), nlohmann::json(0.33));
  EXPECT_TRUE(Cell::number(NAN, 2).to_json().is_null());
  EXPECT_TRUE(Cell::missing().to_json().is_null());
}

TEST(PplTable, FooterReproducesReportedRatioRange) {
  const auto t = build_ppl_table({PplEntry::from("OpenWebText", std::nullopt, report_with_ppl(35.56)),
                                  PplEntry::from("KCH", report_with_ppl(8.78), report_with_ppl(9.58)),
                                  PplEntry::from("MIMIC", report_with_ppl(3.12), report_with_ppl(3.15))},
                                 std::string("OpenWebText"));
  ASSERT_TRUE(t.ratio_range);
  EXPECT_NEAR(t.ratio_range->first, std::log2(35.56) / std::log2(9.58), 1e-12);
  EXPECT_NEAR(t.ratio_range->second, std::log2(35.56) / std::log2(3.15), 1e-12);
  EXPECT_EQ(*t.footer(), "efficiency ratio vs OpenWebText: 1.58×–3.11×");
  const auto table = t.to_table();
  EXPECT_EQ(table.columns,
            (std::vector<std::string>{"corpus", "val_ppl", "val_bits", "test_ppl", "test_bits", "holdout_ppl",
                                      "holdout_bits"}));
  EXPECT_EQ(table.rows[0][1].render(), "–");
  EXPECT_EQ(table.rows[1][3].render(), "9.58");
  EXPECT_EQ(table.rows[1][4].render(), "3.260");
  EXPECT_EQ(table.rows[2][4].render(), "1.655");
  EXPECT_NE(emit(table, Format::markdown).find("1.58×–3.11×"), std::string::npos);
  EXPECT_EQ(emit(table, Format::csv).find("efficiency"), std::string::npos);
}

TEST(PplTable, FooterOnlyWithReferenceAndTargets) {
  const std::vector<PplEntry> one{PplEntry::from("A", std::nullopt, report_with_ppl(10))};
  EXPECT_FALSE(build_ppl_table(one, std::string("A")).footer());
  const std::vector<PplEntry> two{PplEntry::from("A", std::nullopt, report_with_ppl(16)),
                                  PplEntry::from("B", std::nullopt, report_with_ppl(4))};
  EXPECT_FALSE(build_ppl_table(two).footer());
  EXPECT_EQ(*build_ppl_table(two, std::string("A")).footer(), "efficiency ratio vs A: 2.00×");
  EXPECT_THROW(build_ppl_table(two, std::string("C")), ConfigError);
  EXPECT_EQ(build_ppl_table(two, std::nullopt, "kch").to_table().columns[5], "kch_ppl");
}

TEST(CrossMatrix, MissingCellsAndDuplicates) {
  const auto m = build_cross_matrix({{"mimic", "mimic", 3.15}, {"mimic", "kch", 204.9}, {"kch", "kch", 9.58}});
  EXPECT_EQ(m.train_labels, (std::vector<std::string>{"mimic", "kch"}));
  EXPECT_EQ(m.test_labels, (std::vector<std::string>{"mimic", "kch"}));
  EXPECT_FALSE(m.at("kch", "mimic"));
  EXPECT_EQ(emit(m.to_table(), Format::csv),
            "train \\ test,mimic,kch\r\nmimic,3.15,204.90\r\nkch,–,9.58\r\n");
  EXPECT_THROW(build_cross_matrix({{"a", "b", 1.0}, {"a", "b", 2.0}}), Error);
}

TEST(Tables, PerTypeLongSkipsMissing) {
  TypeAggregate a{"nursing", 3, {}, 30};
  a.medians[static_cast<std::size_t>(Component::gestalt)] = 0.5;
  a.medians[static_cast<std::size_t>(Component::rouge1_recall)] = 0.25;
  const auto t = per_type_long({a});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(emit(t, Format::csv),
            "note_type,metric,component,value\r\nnursing,gestalt,ratio,0.50\r\nnursing,rouge1,recall,0.25\r\n");
  const auto agg = aggregate_table({a});
  EXPECT_EQ(agg.columns.size(), 3 + kNumComponents);
  EXPECT_EQ(agg.rows[0][4].render(), "–");
}

TEST(Tables, StatsAndEntropy) {
  CorpusStats s{4, 13.75, 2, 8};
  EXPECT_EQ(emit(stats_table({{"fixture", s}}), Format::csv),
            "dataset,n_docs,avg_length,n_note_types,test_vocab_size\r\nfixture,4,13.75,2,8\r\n");
  EntropyReport r{3.0, 8.0, 6, std::nullopt};
  EXPECT_EQ(emit(entropy_table({{"test", r}}), Format::csv),
            "split,n_tokens,cross_entropy_bits,perplexity,upper_bound_bits\r\ntest,6,3.000,8.00,–\r\n");
}
