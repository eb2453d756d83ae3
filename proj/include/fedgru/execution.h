#pragma once

namespace fedgru {

// `serial` is the reference schedule; `parallel` distributes independent work
// items over OpenMP threads and must produce bit-identical results.
enum class Execution { serial, parallel };

}  // namespace fedgru
