#pragma once

#include "pathflow/ot_solver.hpp"
#include "pathflow/path_space.hpp"

#include <filesystem>
#include <string>

namespace pathflow {

inline constexpr int kBundleFormat = 1;

// "%.17g" rendering; reparses to the same double.
std::string format_double(double x);

std::string bundle_to_json(const EmpiricalMeasure& measure);
EmpiricalMeasure bundle_from_json(const std::string& text);

void write_bundle(const std::filesystem::path& file, const EmpiricalMeasure& measure);
EmpiricalMeasure read_bundle(const std::filesystem::path& file);

// "i,j,mass" rows for every positive plan entry, row-major order.
std::string coupling_csv(const Coupling& coupling);
// {"p": .., "phi": [...], "psi": [...]}
std::string potentials_json(const DualPotentials& potentials);

// Throws ValidationError when the file cannot be written.
void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

}  // namespace pathflow
