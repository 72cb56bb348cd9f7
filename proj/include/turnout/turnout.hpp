#pragma once

#include "turnout/adam.hpp"
#include "turnout/classifier.hpp"
#include "turnout/comparator.hpp"
#include "turnout/curve.hpp"
#include "turnout/curvegen.hpp"
#include "turnout/dataio.hpp"
#include "turnout/error.hpp"
#include "turnout/experiment.hpp"
#include "turnout/investigator.hpp"
#include "turnout/lstm.hpp"
#include "turnout/model_io.hpp"
#include "turnout/ndjson.hpp"
#include "turnout/pipeline.hpp"
#include "turnout/thresholds_io.hpp"
#include "turnout/training.hpp"
