#pragma once

#include "wdro/asymptotics.hpp"
#include "wdro/checks.hpp"
#include "wdro/error.hpp"
#include "wdro/estimator.hpp"
#include "wdro/io.hpp"
#include "wdro/matrix.hpp"
#include "wdro/rng.hpp"
#include "wdro/simulate.hpp"
#include "wdro/stein.hpp"

namespace wdro {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wdro
