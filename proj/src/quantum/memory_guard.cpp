#include "qdsc/quantum/memory_guard.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace qdsc::quantum {

std::size_t statevector_bytes(int qubits) {
  if (qubits < 0 || qubits >= 58) return static_cast<std::size_t>(-1);
  return (std::size_t{1} << qubits) * kBytesPerAmplitude;
}

bool fits_memory_cap(int qubits, std::size_t cap_bytes) {
  return qubits >= 1 && qubits <= kAbsoluteMaxQubits && statevector_bytes(qubits) <= cap_bytes;
}

int max_qubits_for_cap(std::size_t cap_bytes) {
  int q = 0;
  while (fits_memory_cap(q + 1, cap_bytes)) ++q;
  return q;
}

std::size_t memory_cap_from_env() {
  const char* raw = std::getenv(kMemoryCapEnvVar);
  if (raw == nullptr || *raw == '\0') return kDefaultMemoryCapBytes;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0') {
    throw std::invalid_argument(std::string(kMemoryCapEnvVar) + " is not an unsigned integer: " + raw);
  }
  return static_cast<std::size_t>(v);
}

void check_memory_guard(int qubits, std::size_t cap_bytes, std::string_view what) {
  if (fits_memory_cap(qubits, cap_bytes)) return;
  const double need_mib = static_cast<double>(statevector_bytes(qubits)) / (1024.0 * 1024.0);
  const double cap_mib = static_cast<double>(cap_bytes) / (1024.0 * 1024.0);
  throw std::invalid_argument(std::string(what) + ": " + std::to_string(qubits) +
                              " qubits need " + std::to_string(need_mib) +
                              " MiB per statevector, above the memory cap of " + std::to_string(cap_mib) +
                              " MiB (max " + std::to_string(max_qubits_for_cap(cap_bytes)) +
                              " qubits; raise " + kMemoryCapEnvVar + " to override)");
}

}  // namespace qdsc::quantum
