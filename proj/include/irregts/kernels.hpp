#pragma once

#include <cstddef>
#include <string_view>

namespace irregts::kernels {

// Dense double-precision kernels behind the whole engine. Matrices are
// row-major. Each operation has a scalar reference implementation and,
// where the hardware supports it, an AVX2+FMA variant; the active table is
// chosen once at startup. Transcendentals (tanh, exp) stay scalar in every
// backend so activations are bit-identical regardless of dispatch.
struct Ops {
  // y = W x + b (b may be null: y = W x); W is m x n
  void (*affine)(double* y, const double* W, const double* x, const double* b, size_t m, size_t n);
  // dx += W^T dy; W is m x n, dy length m, dx length n
  void (*matvec_t_acc)(double* dx, const double* W, const double* dy, size_t m, size_t n);
  // dW += dy (outer) x; dW is m x n
  void (*ger_acc)(double* dW, const double* dy, const double* x, size_t m, size_t n);
  // y += a * x
  void (*axpy)(double* y, double a, const double* x, size_t n);
  // out = a .* b (out may alias a or b)
  void (*mul)(double* out, const double* a, const double* b, size_t n);
  // out += a .* b
  void (*mul_acc)(double* out, const double* a, const double* b, size_t n);
  double (*dot)(const double* a, const double* b, size_t n);
  double (*sum)(const double* x, size_t n);
  const char* name;
};

const Ops& scalar_ops();
// null when the binary or the CPU cannot run AVX2+FMA
const Ops* avx2_ops();

// Runtime-selected table. Honors IRREGTS_KERNELS=scalar|avx2 when set;
// otherwise picks the widest supported backend. Selection is stable for
// the life of the process.
const Ops& active();

// Force a backend by name ("scalar", "avx2"); throws Error(Config) on an
// unknown or unsupported name. Intended for tests and the CLI flag.
void force_backend(std::string_view name);

std::string_view backend_name();

}  // namespace irregts::kernels
