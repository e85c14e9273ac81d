#pragma once

#include "kfactor/channel.hpp"
#include "kfactor/dataset.hpp"
#include "kfactor/error.hpp"
#include "kfactor/evaluation.hpp"
#include "kfactor/link_quality.hpp"
#include "kfactor/mlp.hpp"
#include "kfactor/pipeline.hpp"
#include "kfactor/random.hpp"
#include "kfactor/scg.hpp"
#include "kfactor/training.hpp"
