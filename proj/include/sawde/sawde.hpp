#pragma once

// Umbrella header for the SaWDE feature-selection library.

#include "sawde/classifier.hpp"
#include "sawde/dataset.hpp"
#include "sawde/de_core.hpp"
#include "sawde/engine.hpp"
#include "sawde/error.hpp"
#include "sawde/harness.hpp"
#include "sawde/rng.hpp"
#include "sawde/run_log.hpp"
#include "sawde/strategy.hpp"
#include "sawde/weighted_model.hpp"
