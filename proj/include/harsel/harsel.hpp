#pragma once

#include "harsel/activity.hpp"
#include "harsel/config.hpp"
#include "harsel/datastore.hpp"
#include "harsel/error.hpp"
#include "harsel/evalbench.hpp"
#include "harsel/featurizer.hpp"
#include "harsel/fixtures.hpp"
#include "harsel/knowledge.hpp"
#include "harsel/llm_bridge.hpp"
#include "harsel/matrix.hpp"
#include "harsel/models.hpp"
#include "harsel/scorer.hpp"
#include "harsel/selector.hpp"
#include "harsel/simgraph.hpp"
#include "harsel/util.hpp"
