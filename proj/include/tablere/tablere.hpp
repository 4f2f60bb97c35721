#pragma once

// Umbrella header for the table relation-extraction toolkit.

#include "tablere/autograd.hpp"
#include "tablere/dataset.hpp"
#include "tablere/embedding.hpp"
#include "tablere/gradcheck.hpp"
#include "tablere/manifest.hpp"
#include "tablere/metrics.hpp"
#include "tablere/model.hpp"
#include "tablere/optimizer.hpp"
#include "tablere/ops.hpp"
#include "tablere/synth.hpp"
#include "tablere/tensor.hpp"
#include "tablere/tokenizer.hpp"
#include "tablere/train.hpp"
#include "tablere/version.hpp"
