#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "sglab/inverse.hpp"
#include "sglab/mlp.hpp"
#include "sglab/solver.hpp"

namespace sglab {

static_assert(std::endian::native == std::endian::little,
              "binary formats are defined little-endian; big-endian hosts are unsupported");

// Shortest round-trip decimal form; locale-independent, byte-deterministic.
inline std::string format_double(double v) {
  std::array<char, 40> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), p);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
  return f;
}

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("unexpected end of file");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// History CSV: header "t,<x0>,<x1>,..."; one row per time slice.
// ---------------------------------------------------------------------------

inline void write_history_csv(const std::filesystem::path& path, const StateHistory& h) {
  auto f = detail::open_out(path, false);
  f << "t";
  for (std::size_t i = 0; i < h.grid.nx; ++i) f << ',' << format_double(h.grid.x(i));
  f << '\n';
  for (std::size_t n = 0; n < h.rows(); ++n) {
    f << format_double(h.grid.t(n));
    for (std::size_t i = 0; i < h.grid.nx; ++i) f << ',' << format_double(h.at(n, i));
    f << '\n';
  }
}

inline void write_snapshot_csv(const std::filesystem::path& path, const StateHistory& h,
                               std::size_t row) {
  if (row >= h.rows()) throw std::invalid_argument("snapshot: row out of range");
  auto f = detail::open_out(path, false);
  f << "x,value\n";
  for (std::size_t i = 0; i < h.grid.nx; ++i)
    f << format_double(h.grid.x(i)) << ',' << format_double(h.at(row, i)) << '\n';
}

// ---------------------------------------------------------------------------
// History binary (magic "SGH1"): u32 version, u64 nt, u64 nx, then row-major
// little-endian f64 values.
// ---------------------------------------------------------------------------

struct RawHistory {
  std::uint64_t nt = 0;
  std::uint64_t nx = 0;
  std::vector<double> data;
};

inline void write_history_binary(const std::filesystem::path& path, const StateHistory& h) {
  auto f = detail::open_out(path, true);
  f.write("SGH1", 4);
  detail::put<std::uint32_t>(f, 1);
  detail::put<std::uint64_t>(f, h.rows());
  detail::put<std::uint64_t>(f, h.grid.nx);
  f.write(reinterpret_cast<const char*>(h.data.data()),
          static_cast<std::streamsize>(h.data.size() * sizeof(double)));
}

inline RawHistory read_history_binary(const std::filesystem::path& path) {
  auto f = detail::open_in(path, true);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SGH1", 4) != 0)
    throw std::runtime_error(path.string() + ": not a history file (bad magic)");
  const auto version = detail::get<std::uint32_t>(f);
  if (version != 1) throw std::runtime_error(path.string() + ": unsupported history version");
  RawHistory h;
  h.nt = detail::get<std::uint64_t>(f);
  h.nx = detail::get<std::uint64_t>(f);
  if (h.nt == 0 || h.nx == 0 || h.nt > (1ull << 32) || h.nx > (1ull << 32))
    throw std::runtime_error(path.string() + ": implausible history dimensions");
  h.data.resize(h.nt * h.nx);
  f.read(reinterpret_cast<char*>(h.data.data()),
         static_cast<std::streamsize>(h.data.size() * sizeof(double)));
  if (!f) throw std::runtime_error(path.string() + ": truncated history data");
  return h;
}

// ---------------------------------------------------------------------------
// Colormap: binary PPM (P6), width = nx, height = nt, one pixel per sample,
// linear min-max normalization onto a fixed 9-anchor blue-to-yellow ramp.
// A constant history renders as uniform mid-palette and is reported back.
// ---------------------------------------------------------------------------

struct RenderResult {
  bool degenerate = false;  // max == min: uniform image written
};

inline std::array<std::uint8_t, 3> palette_color(double v) {
  static constexpr std::array<std::array<int, 3>, 9> anchors{{{68, 1, 84},
                                                              {71, 44, 122},
                                                              {59, 81, 139},
                                                              {44, 113, 142},
                                                              {33, 144, 141},
                                                              {39, 173, 129},
                                                              {92, 200, 99},
                                                              {170, 220, 50},
                                                              {253, 231, 37}}};
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  const double pos = v * static_cast<double>(anchors.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), anchors.size() - 2);
  const double frac = pos - static_cast<double>(i);
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double mixed =
        (1.0 - frac) * anchors[i][static_cast<std::size_t>(c)] +
        frac * anchors[i + 1][static_cast<std::size_t>(c)];
    rgb[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(mixed));
  }
  return rgb;
}

inline RenderResult render_colormap(const std::filesystem::path& path, const double* data,
                                    std::size_t nt, std::size_t nx) {
  if (nt == 0 || nx == 0) throw std::invalid_argument("render: empty history");
  double lo = data[0], hi = data[0];
  for (std::size_t k = 1; k < nt * nx; ++k) {
    if (!(std::isfinite(data[k]))) throw std::invalid_argument("render: non-finite value");
    lo = std::min(lo, data[k]);
    hi = std::max(hi, data[k]);
  }
  RenderResult res;
  res.degenerate = !(hi > lo);
  auto f = detail::open_out(path, true);
  f << "P6\n" << nx << ' ' << nt << "\n255\n";
  std::vector<std::uint8_t> row(nx * 3);
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double raw = data[n * nx + i];
      const double v = res.degenerate ? 0.5 : (raw - lo) / (hi - lo);
      const auto rgb = palette_color(v);
      row[3 * i] = rgb[0];
      row[3 * i + 1] = rgb[1];
      row[3 * i + 2] = rgb[2];
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  return res;
}

inline RenderResult render_colormap(const std::filesystem::path& path, const StateHistory& h) {
  return render_colormap(path, h.data.data(), h.rows(), h.grid.nx);
}

inline RenderResult render_colormap(const std::filesystem::path& path, const RawHistory& h) {
  return render_colormap(path, h.data.data(), h.nt, h.nx);
}

// ---------------------------------------------------------------------------
// Model checkpoint (magic "SGNN"): u32 version, u32 layer count, u32 dims[],
// u64 seed, u64 epoch, f64 loss, u8 transform flag (+ per-input f64
// offset/scale), then per layer row-major f64 weights and f64 biases.
// Parameters are stored as f64 regardless of the training scalar type.
// ---------------------------------------------------------------------------

struct Checkpoint {
  MlpParams<double> params;
  std::uint64_t epoch = 0;
  double loss = 0.0;
};

template <typename Scalar>
void write_checkpoint(const std::filesystem::path& path, const MlpParams<Scalar>& p,
                      std::uint64_t epoch, double loss) {
  auto f = detail::open_out(path, true);
  f.write("SGNN", 4);
  detail::put<std::uint32_t>(f, 1);
  detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(p.layer_dims.size()));
  for (int d : p.layer_dims) detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(d));
  detail::put<std::uint64_t>(f, p.seed);
  detail::put<std::uint64_t>(f, epoch);
  detail::put<double>(f, loss);
  detail::put<std::uint8_t>(f, p.input_transform.identity() ? 0 : 1);
  if (!p.input_transform.identity()) {
    detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(p.input_transform.offset.size()));
    for (Eigen::Index i = 0; i < p.input_transform.offset.size(); ++i) {
      detail::put<double>(f, static_cast<double>(p.input_transform.offset[i]));
      detail::put<double>(f, static_cast<double>(p.input_transform.scale[i]));
    }
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) detail::put<double>(f, static_cast<double>(w(r, c)));
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i)
      detail::put<double>(f, static_cast<double>(p.biases[l][i]));
  }
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  auto f = detail::open_in(path, true);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SGNN", 4) != 0)
    throw std::runtime_error(path.string() + ": not a checkpoint file (bad magic)");
  if (detail::get<std::uint32_t>(f) != 1)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  const auto layers = detail::get<std::uint32_t>(f);
  if (layers < 2 || layers > 64)
    throw std::runtime_error(path.string() + ": implausible layer count");
  std::vector<int> dims(layers);
  for (auto& d : dims) d = static_cast<int>(detail::get<std::uint32_t>(f));
  Checkpoint ck;
  ck.params.layer_dims = dims;
  ck.params.seed = detail::get<std::uint64_t>(f);
  ck.epoch = detail::get<std::uint64_t>(f);
  ck.loss = detail::get<double>(f);
  if (detail::get<std::uint8_t>(f) != 0) {
    const auto in_dim = detail::get<std::uint32_t>(f);
    ck.params.input_transform.offset.resize(in_dim);
    ck.params.input_transform.scale.resize(in_dim);
    for (std::uint32_t i = 0; i < in_dim; ++i) {
      ck.params.input_transform.offset[i] = detail::get<double>(f);
      ck.params.input_transform.scale[i] = detail::get<double>(f);
    }
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseMatrix<double> w(dims[l], dims[l + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = detail::get<double>(f);
    DenseVector<double> b(dims[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = detail::get<double>(f);
    ck.params.weights.push_back(std::move(w));
    ck.params.biases.push_back(std::move(b));
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Small CSV reports.
// ---------------------------------------------------------------------------

inline void write_loss_history_csv(const std::filesystem::path& path,
                                   const std::vector<double>& history) {
  auto f = detail::open_out(path, false);
  f << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    f << e << ',' << format_double(history[e]) << '\n';
}

inline void write_dataset_csv(const std::filesystem::path& path,
                              const std::vector<SampleRow>& rows) {
  auto f = detail::open_out(path, false);
  f << "x,omega,t,eta,eta_t,noisy\n";
  for (const auto& r : rows)
    f << format_double(r.x) << ',' << format_double(r.omega) << ',' << format_double(r.t) << ','
      << format_double(r.eta) << ',' << format_double(r.eta_t) << ',' << (r.noisy ? 1 : 0)
      << '\n';
}

inline std::string inverse_report_csv(const InverseReport& r) {
  std::string s = "time_samples,space_samples,epochs,loss_eta,loss_eta_t,mse_u0,mse_v0,noise_sigma,seed\n";
  s += std::to_string(r.time_samples) + ',' + std::to_string(r.space_samples) + ',' +
       std::to_string(r.epochs) + ',' + format_double(r.loss_eta) + ',' +
       format_double(r.loss_eta_t) + ',' + format_double(r.mse_u0) + ',' +
       format_double(r.mse_v0) + ',' + format_double(r.noise_sigma) + ',' +
       std::to_string(r.seed) + '\n';
  return s;
}

inline void write_inverse_report_csv(const std::filesystem::path& path, const InverseReport& r) {
  auto f = detail::open_out(path, false);
  f << inverse_report_csv(r);
}

inline void write_overlay_csv(const std::filesystem::path& path, const Field& u0_true,
                              const Field& u0_nn, const Field& v0_true, const Field& v0_nn) {
  auto f = detail::open_out(path, false);
  f << "x,u0_true,u0_nn,v0_true,v0_nn\n";
  for (std::size_t i = 0; i < u0_true.size(); ++i)
    f << format_double(u0_true.grid.x(i)) << ',' << format_double(u0_true.values[i]) << ','
      << format_double(u0_nn.values[i]) << ',' << format_double(v0_true.values[i]) << ','
      << format_double(v0_nn.values[i]) << '\n';
}

inline void write_energy_csv(const std::filesystem::path& path, const EnergyReport& r) {
  auto f = detail::open_out(path, false);
  f << "t,energy,bound,satisfied\n";
  for (std::size_t k = 0; k < r.times.size(); ++k)
    f << format_double(r.times[k]) << ',' << format_double(r.energy[k]) << ','
      << format_double(r.bound[k]) << ',' << (r.satisfied[k] ? 1 : 0) << '\n';
}

inline void write_damped_csv(const std::filesystem::path& path, const DampedEnergyReport& r) {
  auto f = detail::open_out(path, false);
  f << "t,lhs\n";
  for (std::size_t k = 0; k < r.times.size(); ++k)
    f << format_double(r.times[k]) << ',' << format_double(r.lhs[k]) << '\n';
}

inline void write_damped_summary_csv(const std::filesystem::path& path,
                                     const DampedEnergyReport& r) {
  auto f = detail::open_out(path, false);
  f << "bound,max_lhs,margin,satisfied\n";
  f << format_double(r.bound) << ',' << format_double(r.max_lhs) << ','
    << format_double(r.margin) << ',' << (r.satisfied ? 1 : 0) << '\n';
}

}  // namespace sglab
