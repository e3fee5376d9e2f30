#pragma once

// Umbrella header for the cascademl toolkit.

#include "cascademl/cascade.hpp"
#include "cascademl/data_split.hpp"
#include "cascademl/dataset.hpp"
#include "cascademl/errors.hpp"
#include "cascademl/feature_select.hpp"
#include "cascademl/format.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/model_io.hpp"
#include "cascademl/network.hpp"
#include "cascademl/pca.hpp"
#include "cascademl/report.hpp"
#include "cascademl/rng.hpp"
#include "cascademl/stats.hpp"
#include "cascademl/train.hpp"
