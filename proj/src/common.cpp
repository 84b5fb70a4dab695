#include "silstm/common.hpp"

#include <iostream>
#include <mutex>

namespace silstm::log {

namespace {
std::mutex sink_mutex;
Sink& sink() {
  static Sink s = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return s;
}
}  // namespace

void set_warning_sink(Sink s) {
  std::lock_guard lock(sink_mutex);
  sink() = std::move(s);
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  if (sink()) sink()(message);
}

}  // namespace silstm::log
