#pragma once

#include "nvr/analysis.hpp"
#include "nvr/dataset.hpp"
#include "nvr/features.hpp"
#include "nvr/fft.hpp"
#include "nvr/io.hpp"
#include "nvr/lattice.hpp"
#include "nvr/losses.hpp"
#include "nvr/noise.hpp"
#include "nvr/ramsey.hpp"
#include "nvr/rng.hpp"
#include "nvr/sweeps.hpp"
