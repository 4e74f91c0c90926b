#pragma once

#include "shrinkrec/builtins.hpp"
#include "shrinkrec/config.hpp"
#include "shrinkrec/counting.hpp"
#include "shrinkrec/error.hpp"
#include "shrinkrec/exact_measure.hpp"
#include "shrinkrec/harness.hpp"
#include "shrinkrec/maps.hpp"
#include "shrinkrec/points.hpp"
#include "shrinkrec/rate.hpp"
#include "shrinkrec/rational.hpp"
#include "shrinkrec/report.hpp"
#include "shrinkrec/rng.hpp"
#include "shrinkrec/run.hpp"
#include "shrinkrec/version.hpp"
