#pragma once

// Shared by the unit tests and the acceptance binary.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pointcpr/errors.hpp"
#include "pointcpr/io.hpp"
#include "pointcpr/ops.hpp"

namespace support {

using pointcpr::Tensor;
using OpFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Contracts f(inputs) against a fixed random weight and returns the worst
// relative error between tape gradients and central differences.
inline double op_grad_error(const OpFn& f, std::vector<Tensor> inputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  const Tensor w = oracle::random_tensor(f(inputs).shape(), rng);
  {
    pointcpr::GradTape tape;
    tape.backward(pointcpr::sum(pointcpr::mul(f(inputs), w)));
  }
  auto value = [&] {
    const Tensor y = f(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += y.data()[i] * w.data()[i];
    return s;
  };
  double worst = 0.0;
  for (auto& x : inputs) {
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    worst = std::max(worst, oracle::relative_error(analytic, oracle::numeric_gradient(value, x)));
  }
  return worst;
}

struct FuzzStats {
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  std::vector<std::string> escapes;  // inputs that raised anything else
};

inline const char* kSamplePly =
    "ply\n"
    "format ascii 1.0\n"
    "comment three vertices\n"
    "element vertex 3\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "element face 1\n"
    "property list uchar int vertex_indices\n"
    "end_header\n"
    "0 0 0\n"
    "1 0 0\n"
    "0 1 0\n"
    "3 0 1 2\n";

// Random byte-level mutations of valid xyz/ply/off files. Each case must
// parse to a finite cloud or raise ParseError/ValidationError.
inline FuzzStats fuzz_parsers(std::size_t cases, std::uint64_t seed) {
  using namespace pointcpr;
  std::mt19937_64 rng(seed);
  const PointCloud base(oracle::random_points(6, rng));
  const std::string seeds[] = {format_pointcloud(base, CloudFormat::xyz), format_pointcloud(base, CloudFormat::ply),
                               format_pointcloud(base, CloudFormat::off), kSamplePly};
  const CloudFormat formats[] = {CloudFormat::xyz, CloudFormat::ply, CloudFormat::off, CloudFormat::ply};
  static const char raw[] = "0123456789 .-+eE\n\t#xyzOFFplyelementvertexpropertyfloatlistend_header\0\xff";
  const std::string alphabet(raw, sizeof raw - 1);
  FuzzStats stats;
  for (std::size_t iter = 0; iter < cases; ++iter) {
    const std::size_t which = rng() % 4;
    std::string s = seeds[which];
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      const std::size_t pos = rng() % s.size();
      switch (rng() % 6) {
        case 0: s.resize(pos); break;
        case 1: s[pos] = alphabet[rng() % alphabet.size()]; break;
        case 2: s.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
        case 3: s.erase(pos, 1 + rng() % 8); break;
        case 4: s.insert(pos, s.substr(pos, rng() % 20)); break;
        default: s[pos] = static_cast<char>(rng() & 0xff); break;
      }
    }
    try {
      const PointCloud pc = parse_pointcloud(s, formats[which], "fuzz");
      bool finite = true;
      for (const auto& p : pc.points())
        for (double c : p) finite = finite && std::isfinite(c);
      if (finite) {
        ++stats.parsed;
      } else {
        stats.escapes.push_back("non-finite cloud accepted");
      }
    } catch (const ParseError&) {
      ++stats.rejected;
    } catch (const ValidationError&) {
      ++stats.rejected;
    } catch (const std::exception& e) {
      stats.escapes.push_back(e.what());
    }
  }
  return stats;
}

}  // namespace support
