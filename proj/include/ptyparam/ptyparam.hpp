#pragma once

#include "ptyparam/grid.hpp"
#include "ptyparam/fft.hpp"
#include "ptyparam/masks.hpp"
#include "ptyparam/ptyf_io.hpp"
#include "ptyparam/dipole.hpp"
#include "ptyparam/rect.hpp"
#include "ptyparam/recon.hpp"
#include "ptyparam/optimize.hpp"
#include "ptyparam/fit.hpp"
#include "ptyparam/fisher.hpp"
#include "ptyparam/montecarlo.hpp"
#include "ptyparam/pipeline.hpp"
