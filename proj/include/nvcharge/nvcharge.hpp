#pragma once

#include "nvcharge/decay.hpp"
#include "nvcharge/decomposition.hpp"
#include "nvcharge/errors.hpp"
#include "nvcharge/fit_result.hpp"
#include "nvcharge/full_model.hpp"
#include "nvcharge/io/csv.hpp"
#include "nvcharge/io/dataset.hpp"
#include "nvcharge/io/files.hpp"
#include "nvcharge/io/json.hpp"
#include "nvcharge/io/report.hpp"
#include "nvcharge/io/svg.hpp"
#include "nvcharge/kinetics.hpp"
#include "nvcharge/lineshape.hpp"
#include "nvcharge/lsq.hpp"
#include "nvcharge/ode.hpp"
#include "nvcharge/optics.hpp"
#include "nvcharge/peak_fit.hpp"
#include "nvcharge/preprocess.hpp"
#include "nvcharge/rng.hpp"
#include "nvcharge/spectrum.hpp"
#include "nvcharge/sweep_fit.hpp"
#include "nvcharge/synth.hpp"
