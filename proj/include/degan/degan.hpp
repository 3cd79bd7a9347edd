// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "degan/baselines.hpp"
#include "degan/checkpoint.hpp"
#include "degan/degrade.hpp"
#include "degan/discriminator.hpp"
#include "degan/error.hpp"
#include "degan/generator.hpp"
#include "degan/image.hpp"
#include "degan/io.hpp"
#include "degan/keyvalue.hpp"
#include "degan/metrics.hpp"
#include "degan/nn/adam.hpp"
#include "degan/nn/layers.hpp"
#include "degan/nn/tensor.hpp"
#include "degan/objective.hpp"
#include "degan/patches.hpp"
#include "degan/seed.hpp"
#include "degan/trainer.hpp"
