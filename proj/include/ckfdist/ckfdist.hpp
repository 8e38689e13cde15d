#pragma once

#include "ckfdist/body_model.hpp"
#include "ckfdist/distance.hpp"
#include "ckfdist/errors.hpp"
#include "ckfdist/experiment.hpp"
#include "ckfdist/filter.hpp"
#include "ckfdist/geometry.hpp"
#include "ckfdist/metrics.hpp"
#include "ckfdist/simulator.hpp"
#include "ckfdist/state.hpp"
#include "ckfdist/trial_io.hpp"
