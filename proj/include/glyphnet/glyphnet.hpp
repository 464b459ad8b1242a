#pragma once

#include "glyphnet/augment.hpp"
#include "glyphnet/checkpoint.hpp"
#include "glyphnet/config.hpp"
#include "glyphnet/dataset.hpp"
#include "glyphnet/encoder.hpp"
#include "glyphnet/errors.hpp"
#include "glyphnet/evaluation.hpp"
#include "glyphnet/image.hpp"
#include "glyphnet/image_io.hpp"
#include "glyphnet/losses.hpp"
#include "glyphnet/model.hpp"
#include "glyphnet/nn.hpp"
#include "glyphnet/optimizer.hpp"
#include "glyphnet/pair_sampler.hpp"
#include "glyphnet/rng.hpp"
#include "glyphnet/schedule.hpp"
#include "glyphnet/synth.hpp"
#include "glyphnet/training.hpp"
