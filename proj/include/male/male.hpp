#pragma once

// Umbrella header.
#include "male/dataset.hpp"
#include "male/diagnostics.hpp"
#include "male/error.hpp"
#include "male/estimator.hpp"
#include "male/experiments.hpp"
#include "male/link.hpp"
#include "male/methods.hpp"
#include "male/models.hpp"
#include "male/normal.hpp"
#include "male/quadrature.hpp"
#include "male/rng.hpp"
#include "male/sparse_grid.hpp"
#include "male/version.hpp"
