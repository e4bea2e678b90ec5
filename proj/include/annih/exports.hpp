#pragma once

#include <complex>
#include <span>
#include <string>

#include "annih/distributional.hpp"
#include "annih/genfunc.hpp"
#include "annih/moments.hpp"
#include "annih/reaction.hpp"
#include "annih/sde.hpp"

namespace annih {

// Plot-ready CSV emitters, one per data shape. Probabilities are clipped at
// zero on export; numbers use shortest round-trip formatting so repeated
// runs produce byte-identical files.

// n,prob[,stderr] — the stderr column appears for empirical laws only.
void write_distribution_csv(const CountDistribution& dist, const std::string& path);

// x,G
void write_gfgrid_csv(const GFGrid& grid, const std::string& path);

// m,M_m,t
void write_moment_table_csv(const FactorialMoments& moments, const std::string& path);

// m,re,im,stderr
void write_complex_moments_csv(std::span<const MomentEstimate> moments,
                               const std::string& path);

// path,t,z1,z2,flagged
void write_ensemble_csv(const ComplexEnsemble& ens, const std::string& path);

// n,c_n
void write_comb_csv(const DeltaComb& comb, const std::string& path);

// re_phi,im_phi,re_value,im_value,remainder_bound
void write_laurent_csv(const LaurentRep& rep, std::span<const std::complex<double>> points,
                       double radius, const std::string& path);

}  // namespace annih
