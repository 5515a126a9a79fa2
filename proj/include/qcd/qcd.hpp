#pragma once

#include "qcd/csv.hpp"
#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"
#include "qcd/error.hpp"
#include "qcd/harness.hpp"
#include "qcd/random.hpp"
#include "qcd/statistics.hpp"
#include "qcd/theory.hpp"
