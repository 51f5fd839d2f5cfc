#pragma once

#include <cstddef>
#include <string_view>

#include "qdsc/quantum/state_vector.hpp"

namespace qdsc::quantum {

inline constexpr std::size_t kBytesPerAmplitude = sizeof(Complex);
// 2^16 amplitudes of 16 bytes.
inline constexpr std::size_t kDefaultMemoryCapBytes = (std::size_t{1} << 16) * kBytesPerAmplitude;
inline constexpr const char* kMemoryCapEnvVar = "QDSC_MEM_CAP_BYTES";

/// Bytes needed by one dense statevector on `qubits` qubits.
std::size_t statevector_bytes(int qubits);

/// True iff 2^qubits amplitudes fit in `cap_bytes`.
bool fits_memory_cap(int qubits, std::size_t cap_bytes);

/// Largest qubit count accepted under `cap_bytes` (0 if none).
int max_qubits_for_cap(std::size_t cap_bytes);

/// Cap from QDSC_MEM_CAP_BYTES, or the default when unset. Throws
/// std::invalid_argument on an unparsable value.
std::size_t memory_cap_from_env();

/// Throws std::invalid_argument naming `what` and the memory requirement when
/// the circuit does not fit.
void check_memory_guard(int qubits, std::size_t cap_bytes, std::string_view what);

}  // namespace qdsc::quantum
