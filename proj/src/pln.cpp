#include "dks/pln.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "dks/errors.hpp"

namespace dks {

namespace {

void check(const FeatureMap& x) {
  if (x.rows() < 1 || x.cols() < 1) throw ShapeError("feature map needs at least one channel and one location");
  if (!x.allFinite()) throw DomainError("feature map has non-finite entries");
}

FeatureMap append_channel(const FeatureMap& x, double extra) {
  const double k = static_cast<double>(x.rows());
  FeatureMap out(x.rows() + 1, x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double s = std::sqrt((k + 1.0) / (x.col(i).squaredNorm() + extra * extra));
    out.col(i).head(x.rows()) = s * x.col(i);
    out(x.rows(), i) = s * extra;
  }
  return out;
}

}  // namespace

FeatureMap pln(const FeatureMap& x) {
  check(x);
  // Divide by the largest magnitude first so that tiny or huge inputs give
  // bit-identical results up to rounding of the rescale.
  const double scale = x.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw DomainError("pln input is all zeros; the extra channel would be 0");
  const FeatureMap xs = x / scale;
  const double mean_sq = xs.colwise().squaredNorm().mean();
  return append_channel(xs, std::sqrt(mean_sq / static_cast<double>(x.rows())));
}

FeatureMap pln_const(const FeatureMap& x, double c) {
  check(x);
  if (!(c != 0.0) || !std::isfinite(c)) throw DomainError("pln constant channel value must be finite and non-zero");
  return append_channel(x, c);
}

FeatureMap pln_const_inverse(const FeatureMap& y, double c) {
  check(y);
  if (y.rows() < 2) throw ShapeError("pln output needs at least two channels");
  if (!(c != 0.0) || !std::isfinite(c)) throw DomainError("pln constant channel value must be finite and non-zero");
  const Eigen::Index k = y.rows() - 1;
  FeatureMap x(k, y.cols());
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    // The last entry is c sqrt(k + 1) / sqrt(||x||^2 + c^2) = c * s.
    const double s = y(k, i) / c;
    if (!(s > 0.0)) throw DomainError("not a pln_const output: extra channel has the wrong sign");
    x.col(i) = y.col(i).head(k) / s;
  }
  return x;
}

FeatureMap read_feature_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos)
        throw DomainError("CSV line " + std::to_string(lineno) + ": '" + cell + "' is not a number");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw ShapeError("CSV line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                       " values, expected " + std::to_string(rows[0].size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ShapeError("CSV input is empty");
  FeatureMap x(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
  return x;
}

std::string write_feature_csv(const FeatureMap& x) {
  std::string out;
  char buf[32];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", x(i, j));
      if (j > 0) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace dks
