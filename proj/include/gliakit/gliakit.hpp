#pragma once

/// Umbrella header for the full toolkit.

#include "gliakit/augment.hpp"
#include "gliakit/config_json.hpp"
#include "gliakit/csv.hpp"
#include "gliakit/ensemble.hpp"
#include "gliakit/error.hpp"
#include "gliakit/fft.hpp"
#include "gliakit/geometry.hpp"
#include "gliakit/losses.hpp"
#include "gliakit/metrics_image.hpp"
#include "gliakit/metrics_seg.hpp"
#include "gliakit/morphology.hpp"
#include "gliakit/nifti.hpp"
#include "gliakit/parallel.hpp"
#include "gliakit/phantom.hpp"
#include "gliakit/postproc.hpp"
#include "gliakit/regions.hpp"
#include "gliakit/rng.hpp"
#include "gliakit/schema.hpp"
#include "gliakit/version.hpp"
#include "gliakit/volume.hpp"
