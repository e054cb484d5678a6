#pragma once

#include "ramm/cibl.hpp"
#include "ramm/corpus.hpp"
#include "ramm/embeddings.hpp"
#include "ramm/encoder.hpp"
#include "ramm/fusion.hpp"
#include "ramm/gradcheck.hpp"
#include "ramm/metrics.hpp"
#include "ramm/model.hpp"
#include "ramm/narrative.hpp"
#include "ramm/optimizer.hpp"
#include "ramm/pipeline.hpp"
#include "ramm/retrieval.hpp"
#include "ramm/synth.hpp"
#include "ramm/training.hpp"
