#pragma once

// Umbrella header for the aggregate-observation learning library.

#include "agglearn/aggregate.hpp"
#include "agglearn/core.hpp"
#include "agglearn/data.hpp"
#include "agglearn/eval.hpp"
#include "agglearn/experiment.hpp"
#include "agglearn/likelihood.hpp"
#include "agglearn/math.hpp"
#include "agglearn/model.hpp"
#include "agglearn/oracle.hpp"
#include "agglearn/rng.hpp"
#include "agglearn/train.hpp"
