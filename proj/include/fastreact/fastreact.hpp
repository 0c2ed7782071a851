#pragma once

#include "fastreact/config.hpp"
#include "fastreact/diagnostics.hpp"
#include "fastreact/error.hpp"
#include "fastreact/grid.hpp"
#include "fastreact/harness.hpp"
#include "fastreact/identities.hpp"
#include "fastreact/kinetics.hpp"
#include "fastreact/model.hpp"
#include "fastreact/roots.hpp"
#include "fastreact/solver.hpp"
