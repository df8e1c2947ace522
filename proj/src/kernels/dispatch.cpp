#include <cstdlib>
#include <string>

#include "irregts/errors.hpp"
#include "irregts/kernels.hpp"

namespace irregts::kernels {

// defined in kernels_avx2.cpp; null when that TU targets a non-x86 build
const Ops* avx2_ops_compiled();

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* select_by_name(std::string_view name) {
  if (name == "scalar") return &scalar_ops();
  if (name == "avx2") {
    const Ops* t = avx2_ops();
    if (!t) raise(ErrorKind::Config, "kernel backend 'avx2' not supported on this CPU");
    return t;
  }
  raise(ErrorKind::Config, "unknown kernel backend '" + std::string(name) + "'");
}

const Ops* initial_selection() {
  if (const char* env = std::getenv("IRREGTS_KERNELS")) return select_by_name(env);
  if (const Ops* t = avx2_ops()) return t;
  return &scalar_ops();
}

const Ops*& active_slot() {
  static const Ops* slot = initial_selection();
  return slot;
}

}  // namespace

const Ops* avx2_ops() { return cpu_has_avx2_fma() ? avx2_ops_compiled() : nullptr; }

const Ops& active() { return *active_slot(); }

void force_backend(std::string_view name) { active_slot() = select_by_name(name); }

std::string_view backend_name() { return active().name; }

}  // namespace irregts::kernels
