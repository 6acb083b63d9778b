#include "flowlab/blocks.hpp"

#include <stdexcept>

namespace flowlab {

namespace {

double coord_mean(const BlockInputs& in, const FieldCoord& c) {
  switch (c.type) {
    case FieldCoord::Type::Omega: return c.beta * in.mc(c.index);
    case FieldCoord::Type::Data: return in.mc(c.index);
    case FieldCoord::Type::Noise: return 0.0;
  }
  return 0.0;
}

double coord_cov(const BlockInputs& in, const FieldCoord& a, const FieldCoord& b) {
  using T = FieldCoord::Type;
  const int i = a.index, j = b.index;
  if (a.type == T::Omega && b.type == T::Omega)
    return a.alpha * b.alpha * in.qcal(i, j) + a.beta * b.beta * in.qc(i, j);
  if (a.type == T::Data && b.type == T::Omega) return b.beta * in.qc(i, j);
  if (a.type == T::Omega && b.type == T::Data) return a.beta * in.qc(i, j);
  if (a.type == T::Noise && b.type == T::Omega) return b.alpha * in.qcal(i, j);
  if (a.type == T::Omega && b.type == T::Noise) return a.alpha * in.qcal(i, j);
  if (a.type == T::Data && b.type == T::Data) return in.qc(i, j);
  if (a.type == T::Noise && b.type == T::Noise) return in.qcal(i, j);
  return 0.0;  // Data-Noise cross terms vanish
}

}  // namespace

GaussianSpec field_gaussian(const BlockInputs& in, const std::vector<FieldCoord>& coords) {
  const int n = static_cast<int>(coords.size());
  GaussianSpec spec;
  spec.mean.resize(n);
  spec.cov.resize(n, n);
  for (int i = 0; i < n; ++i) {
    spec.mean(i) = coord_mean(in, coords[i]);
    for (int j = 0; j <= i; ++j) {
      const double v = coord_cov(in, coords[i], coords[j]);
      spec.cov(i, j) = v;
      spec.cov(j, i) = v;
    }
  }
  return spec;
}

BlockKind block_kind_from_name(const std::string& name) {
  if (name == "omega_t") return BlockKind::OmegaT;
  if (name == "omega_tt") return BlockKind::OmegaTT;
  if (name == "omega3") return BlockKind::Omega3;
  if (name == "phi3") return BlockKind::Phi3;
  if (name == "psi3") return BlockKind::Psi3;
  if (name == "omega4") return BlockKind::Omega4;
  if (name == "phi4") return BlockKind::Phi4;
  if (name == "psi4") return BlockKind::Psi4;
  if (name == "p411") return BlockKind::P411;
  if (name == "p401") return BlockKind::P401;
  if (name == "p400") return BlockKind::P400;
  throw std::invalid_argument("unknown block kind: " + name);
}

GaussianSpec build_block(BlockKind kind, const BlockInputs& in,
                         const std::vector<TimePoint>& times,
                         const std::vector<int>& indices) {
  auto om = [&](std::size_t time_slot, std::size_t idx_slot) {
    const TimePoint& tp = times.at(time_slot);
    return omega_field(indices.at(idx_slot), tp.alpha, tp.beta);
  };

  std::vector<FieldCoord> coords;
  switch (kind) {
    case BlockKind::OmegaT:
      for (std::size_t i = 0; i < indices.size(); ++i) coords.push_back(om(0, i));
      break;
    case BlockKind::OmegaTT:
      coords = {om(0, 0), om(1, 1)};
      break;
    case BlockKind::Omega3:
      coords = {om(0, 0), om(1, 1), om(2, 2)};
      break;
    case BlockKind::Phi3:
      coords = {om(0, 0), om(1, 1), data_field(indices.at(2))};
      break;
    case BlockKind::Psi3:
      coords = {om(0, 0), om(1, 1), noise_field(indices.at(2))};
      break;
    case BlockKind::Omega4:
      coords = {om(0, 0), om(1, 1), om(2, 2), om(3, 3)};
      break;
    case BlockKind::Phi4:
      coords = {om(0, 0), om(1, 1), om(2, 2), data_field(indices.at(3))};
      break;
    case BlockKind::Psi4:
      coords = {om(0, 0), om(1, 1), om(2, 2), noise_field(indices.at(3))};
      break;
    case BlockKind::P411:
      coords = {om(0, 0), om(1, 1), data_field(indices.at(2)), data_field(indices.at(3))};
      break;
    case BlockKind::P401:
      coords = {om(0, 0), om(1, 1), noise_field(indices.at(2)), data_field(indices.at(3))};
      break;
    case BlockKind::P400:
      coords = {om(0, 0), om(1, 1), noise_field(indices.at(2)), noise_field(indices.at(3))};
      break;
  }
  return field_gaussian(in, coords);
}

}  // namespace flowlab
