#pragma once

#include "fusetext/attention.hpp"
#include "fusetext/autodiff.hpp"
#include "fusetext/aux_features.hpp"
#include "fusetext/baseline.hpp"
#include "fusetext/checkpoint.hpp"
#include "fusetext/dataset.hpp"
#include "fusetext/encoder.hpp"
#include "fusetext/errors.hpp"
#include "fusetext/heads.hpp"
#include "fusetext/lda.hpp"
#include "fusetext/losses.hpp"
#include "fusetext/metrics.hpp"
#include "fusetext/model.hpp"
#include "fusetext/optim.hpp"
#include "fusetext/pipeline.hpp"
#include "fusetext/random.hpp"
#include "fusetext/tensor.hpp"
#include "fusetext/text.hpp"
#include "fusetext/training.hpp"
