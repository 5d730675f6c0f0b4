#include "dissect/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <string_view>

namespace dissect {

namespace {

spdlog::level::level_enum level_from_env() {
  const char* env = std::getenv("DISSECT_LOG");
  const std::string_view v = env ? env : "off";
  if (v == "trace") return spdlog::level::trace;
  if (v == "info") return spdlog::level::info;
  return spdlog::level::off;
}

}  // namespace

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("dissect");
    l->set_level(level_from_env());
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    return l;
  }();
  return *instance;
}

}  // namespace dissect
