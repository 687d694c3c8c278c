// tolerances.hpp - every numerical tolerance used by an invariant check lives here

#pragma once

namespace locclab::tol {

// DensityOperator: max |M - M^dagger| entrywise
inline constexpr double hermitian = 1e-10;
// DensityOperator: smallest eigenvalue may dip to -psd
inline constexpr double psd = 1e-9;
// DensityOperator: |Tr M - 1|
inline constexpr double trace = 1e-10;
// PureState: | ||v||_2 - 1 |
inline constexpr double pure_norm = 1e-12;
// MeasurementChannel: completeness and element positivity
inline constexpr double povm = 1e-9;
// SchmidtSpectrum: |sum p_i m_i - 1|
inline constexpr double spectrum_sum = 1e-12;
// PPT relaxation: largest accepted certified gap, in success-probability units
inline constexpr double sdp_gap = 1e-6;
// Teleportation: accepted 1 - |<phi_L|resource>|^2
inline constexpr double resource_overlap = 1e-10;
// BoundBracket ordering slack
inline constexpr double bracket = 1e-6;

} // namespace locclab::tol
