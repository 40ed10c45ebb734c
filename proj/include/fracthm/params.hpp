#pragma once

#include <utility>

namespace fracthm {

/// Material parameters of the rock, the fluid and the fractures. SI units
/// throughout; temperatures in kelvin.
struct MaterialParams {
  double lame_lambda = 16e9;           // Pa
  double shear_modulus = 16e9;         // Pa
  double biot_alpha = 0.8;             // -
  double bulk_modulus = 16e9 + 2.0 * 16e9 / 3.0;  // Pa, drained: lambda + 2 G / 3
  double solid_thermal_expansion = 3e-5;  // 1/K
  double fluid_thermal_expansion = 4e-4;  // 1/K
  double porosity = 0.01;
  double fluid_compressibility = 4e-10;  // 1/Pa
  double permeability = 1e-14;           // m^2
  double viscosity = 1e-3;               // Pa s
  double fluid_density = 1000.0;         // kg/m^3
  double fluid_heat_capacity = 4200.0;   // J/(kg K)
  double density = 2700.0;               // effective, kg/m^3
  double heat_capacity = 790.0;          // effective, J/(kg K)
  double thermal_conductivity = 3.0;     // W/(m K)
  double reference_temperature = 273.15; // K
  double friction_coefficient = 0.5;
  double interface_permeability = 1e-6;  // m/(Pa s)
  double interface_conductivity = 1e3;   // W/(m^2 K)
  double residual_aperture = 1e-5;       // m
  double initial_aperture = 1e-4;        // m

  /// Lame parameters from Young's modulus and Poisson's ratio.
  static std::pair<double, double> lame_from_young(double young, double poisson) {
    const double lambda = young * poisson / ((1 + poisson) * (1 - 2 * poisson));
    const double mu = young / (2 * (1 + poisson));
    return {lambda, mu};
  }

  /// Storage coefficient of the matrix mass balance: phi c + (alpha - phi) / K.
  double matrix_storage() const {
    return porosity * fluid_compressibility + (biot_alpha - porosity) / bulk_modulus;
  }

  bool operator==(const MaterialParams&) const = default;
};

}  // namespace fracthm
