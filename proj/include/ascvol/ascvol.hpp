#pragma once

#include "ascvol/active.hpp"
#include "ascvol/csv.hpp"
#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"
#include "ascvol/loss.hpp"
#include "ascvol/metrics.hpp"
#include "ascvol/nifti.hpp"
#include "ascvol/numeric.hpp"
#include "ascvol/phantom.hpp"
#include "ascvol/preprocess.hpp"
#include "ascvol/quantify.hpp"
#include "ascvol/random.hpp"
#include "ascvol/report.hpp"
#include "ascvol/stats.hpp"
#include "ascvol/version.hpp"
