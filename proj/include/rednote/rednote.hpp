#ifndef REDNOTE_REDNOTE_HPP
#define REDNOTE_REDNOTE_HPP

#include "rednote/bpe.hpp"
#include "rednote/common.hpp"
#include "rednote/corpus.hpp"
#include "rednote/csv.hpp"
#include "rednote/embedding.hpp"
#include "rednote/lm.hpp"
#include "rednote/metrics.hpp"
#include "rednote/pipeline.hpp"
#include "rednote/report.hpp"
#include "rednote/synth.hpp"
#include "rednote/timestamp.hpp"
#include "rednote/tokenize.hpp"

#endif  // REDNOTE_REDNOTE_HPP
