#pragma once

// Everything except the batch pipeline, which additionally needs OpenSSL.

#include "superstat/core.hpp"
#include "superstat/distributions.hpp"
#include "superstat/dynamics.hpp"
#include "superstat/impact.hpp"
#include "superstat/io.hpp"
#include "superstat/loess.hpp"
#include "superstat/mixture.hpp"
#include "superstat/quadrature.hpp"
#include "superstat/segmentation.hpp"
#include "superstat/stats.hpp"
#include "superstat/synth.hpp"
#include "superstat/timeseries.hpp"
