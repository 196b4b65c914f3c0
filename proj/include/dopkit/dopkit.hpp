#pragma once

// Umbrella header for the DOP-tuning toolkit.

#include "dopkit/csv.hpp"
#include "dopkit/data.hpp"
#include "dopkit/decision_tree.hpp"
#include "dopkit/elastic_net.hpp"
#include "dopkit/errors.hpp"
#include "dopkit/featurize.hpp"
#include "dopkit/gradient_boosting.hpp"
#include "dopkit/harness.hpp"
#include "dopkit/matrix.hpp"
#include "dopkit/metrics.hpp"
#include "dopkit/model.hpp"
#include "dopkit/plan.hpp"
#include "dopkit/random_forest.hpp"
#include "dopkit/rng.hpp"
#include "dopkit/selection.hpp"
#include "dopkit/synth.hpp"
