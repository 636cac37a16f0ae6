#pragma once

#include "gsstex/config.hpp"
#include "gsstex/encoder.hpp"
#include "gsstex/error.hpp"
#include "gsstex/evaluation.hpp"
#include "gsstex/fisher.hpp"
#include "gsstex/gmm.hpp"
#include "gsstex/image.hpp"
#include "gsstex/lbp.hpp"
#include "gsstex/load_descriptor.hpp"
#include "gsstex/pca.hpp"
#include "gsstex/pipeline.hpp"
#include "gsstex/scalespace.hpp"
#include "gsstex/svm.hpp"
#include "gsstex/synth.hpp"
