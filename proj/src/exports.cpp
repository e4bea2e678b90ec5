#include "annih/exports.hpp"

#include "annih/csv.hpp"

namespace annih {

void write_distribution_csv(const CountDistribution& dist, const std::string& path) {
  const bool empirical = dist.n_samples > 0 && dist.stderrs.size() == dist.probs.size();
  const Eigen::VectorXd probs = dist.exported_probs();
  CsvWriter csv(empirical ? std::vector<std::string>{"n", "prob", "stderr"}
                          : std::vector<std::string>{"n", "prob"});
  for (int n = 0; n < probs.size(); ++n) {
    if (empirical) {
      csv.add_row({std::to_string(n), format_double(probs[n]), format_double(dist.stderrs[n])});
    } else {
      csv.add_row({std::to_string(n), format_double(probs[n])});
    }
  }
  csv.write(path);
}

void write_gfgrid_csv(const GFGrid& grid, const std::string& path) {
  CsvWriter csv({"x", "G"});
  for (int i = 0; i < grid.nodes.size(); ++i)
    csv.add_row({format_double(grid.nodes[i]), format_double(grid.values[i])});
  csv.write(path);
}

void write_moment_table_csv(const FactorialMoments& moments, const std::string& path) {
  CsvWriter csv({"m", "M_m", "t"});
  for (int m = 0; m < moments.values.size(); ++m)
    csv.add_row({std::to_string(m), format_double(moments.values[m]),
                 format_double(moments.time)});
  csv.write(path);
}

void write_complex_moments_csv(std::span<const MomentEstimate> moments,
                               const std::string& path) {
  CsvWriter csv({"m", "re", "im", "stderr"});
  for (const auto& m : moments)
    csv.add_row({std::to_string(m.order), format_double(m.value.real()),
                 format_double(m.value.imag()), format_double(m.stderr_max())});
  csv.write(path);
}

void write_ensemble_csv(const ComplexEnsemble& ens, const std::string& path) {
  CsvWriter csv({"path", "t", "z1", "z2", "flagged"});
  for (std::int64_t p = 0; p < ens.points.size(); ++p)
    csv.add_row({std::to_string(p), format_double(ens.time),
                 format_double(ens.points[p].real()), format_double(ens.points[p].imag()),
                 ens.alive[p] ? "0" : "1"});
  csv.write(path);
}

void write_comb_csv(const DeltaComb& comb, const std::string& path) {
  CsvWriter csv({"n", "c_n"});
  for (int n = 0; n < comb.coeffs.size(); ++n)
    csv.add_row({std::to_string(n), format_double(comb.coeffs[n])});
  csv.write(path);
}

void write_laurent_csv(const LaurentRep& rep, std::span<const std::complex<double>> points,
                       double radius, const std::string& path) {
  CsvWriter csv({"re_phi", "im_phi", "re_value", "im_value", "remainder_bound"});
  for (const auto& phi : points) {
    const LaurentValue v = laurent_eval(rep, phi, radius);
    csv.add_row({format_double(phi.real()), format_double(phi.imag()),
                 format_double(v.value.real()), format_double(v.value.imag()),
                 format_double(v.remainder_bound)});
  }
  csv.write(path);
}

}  // namespace annih
