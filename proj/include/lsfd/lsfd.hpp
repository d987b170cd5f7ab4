// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lsfd/channel.hpp"
#include "lsfd/combiners.hpp"
#include "lsfd/common.hpp"
#include "lsfd/experiments.hpp"
#include "lsfd/optimizer.hpp"
#include "lsfd/report.hpp"
#include "lsfd/scenario.hpp"
#include "lsfd/spectral_efficiency.hpp"
