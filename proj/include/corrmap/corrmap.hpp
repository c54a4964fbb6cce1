#pragma once

#include "corrmap/core.hpp"
#include "corrmap/embedding.hpp"
#include "corrmap/error.hpp"
#include "corrmap/estimators.hpp"
#include "corrmap/io.hpp"
#include "corrmap/matrix.hpp"
#include "corrmap/parallel.hpp"
#include "corrmap/pipeline.hpp"
#include "corrmap/random.hpp"
#include "corrmap/spectral.hpp"
#include "corrmap/synth.hpp"
