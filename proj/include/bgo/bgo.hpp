// Umbrella header for the core library (no YAML or POSIX dependencies).
#pragma once

#include "acquisition.hpp"
#include "benchmarks.hpp"
#include "core.hpp"
#include "design.hpp"
#include "gp.hpp"
#include "hyper_posterior.hpp"
#include "optimizer.hpp"
#include "uq.hpp"
