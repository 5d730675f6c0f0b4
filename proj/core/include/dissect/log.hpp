#pragma once

#include <spdlog/logger.h>

#include <memory>

namespace dissect {

/// Shared stderr logger. Level from DISSECT_LOG: off (default), info, trace.
/// At trace level every protocol message is logged with its timestamps.
spdlog::logger& logger();

}  // namespace dissect
