#include "notmiwae/missingness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace notmiwae {
namespace {

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw IoError("non-numeric CSV cell '" + cell + "' at row " +
                  std::to_string(row) + ", column " + std::to_string(col));
  return v;
}

std::string format_value(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

bool looks_numeric(const std::string& cell) {
  if (cell.empty()) return true;  // missing counts as numeric content
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

std::size_t MaskedDataset::missing_cells() const {
  std::size_t count = 0;
  for (const auto& row : mask)
    for (double m : row)
      if (m == 0.0) ++count;
  return count;
}

void MaskedDataset::validate() const {
  if (mask.size() != n())
    throw ValueError("mask row count does not match data");
  for (std::size_t i = 0; i < n(); ++i) {
    if (mask[i].size() != p() || x_obs[i].size() != p())
      throw ValueError("ragged dataset at row " + std::to_string(i));
    for (std::size_t j = 0; j < p(); ++j) {
      const double m = mask[i][j];
      if (m != 0.0 && m != 1.0)
        throw ValueError("mask entries must be 0 or 1");
      if (x_full && m == 1.0 && x_obs[i][j] != (*x_full)[i][j])
        throw ValueError("observed cell differs from ground truth at row " +
                         std::to_string(i));
    }
  }
}

CsvData load_csv(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV: " + path);
  CsvData out;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    auto cells = split_line(line);
    if (first && header) {
      out.header = cells;
      width = cells.size();
      first = false;
      continue;
    }
    if (first) {
      // guard against a forgotten header flag
      for (const auto& c : cells)
        if (!looks_numeric(c))
          throw IoError("CSV " + path + " starts with non-numeric cell '" + c +
                        "'; pass header=true if the file has a header row");
      width = cells.size();
      first = false;
    }
    if (cells.size() != width)
      throw IoError("ragged CSV row " + std::to_string(row) + " in " + path +
                    ": " + std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(width));
    std::vector<double> vals(width), mask(width);
    for (std::size_t j = 0; j < width; ++j) {
      if (cells[j].empty()) {
        vals[j] = 0.0;
        mask[j] = 0.0;
      } else {
        vals[j] = parse_cell(cells[j], row, j);
        mask[j] = 1.0;
      }
    }
    out.values.push_back(std::move(vals));
    out.mask.push_back(std::move(mask));
    ++row;
  }
  if (out.values.empty()) throw IoError("empty CSV: " + path);
  return out;
}

void write_csv(const std::string& path, const Matrix& m, const Matrix* mask,
               const std::vector<std::string>* header) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV: " + path);
  if (header && !header->empty()) {
    for (std::size_t j = 0; j < header->size(); ++j)
      out << (j ? "," : "") << (*header)[j];
    out << "\n";
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& row = m[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ",";
      const bool missing = mask && (*mask)[i][j] == 0.0;
      if (!missing) out << format_value(row[j]);
    }
    out << "\n";
  }
}

MaskedDataset make_masked(Matrix x_full, Matrix mask, bool keep_truth) {
  MaskedDataset d;
  d.x_obs = x_full;
  for (std::size_t i = 0; i < d.x_obs.size(); ++i)
    for (std::size_t j = 0; j < d.x_obs[i].size(); ++j)
      if (mask[i][j] == 0.0) d.x_obs[i][j] = 0.0;
  d.mask = std::move(mask);
  if (keep_truth) d.x_full = std::move(x_full);
  d.validate();
  return d;
}

void standardize(MaskedDataset& data, StatsSource source) {
  const std::size_t n = data.n(), p = data.p();
  if (source == StatsSource::complete_data && !data.x_full)
    throw ValueError("complete-data statistics need ground truth");
  std::vector<double> means(p, 0.0), stds(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0, sumsq = 0.0, count = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      if (source == StatsSource::complete_data) {
        v = (*data.x_full)[i][j];
      } else {
        if (data.mask[i][j] == 0.0) continue;
        v = data.x_obs[i][j];
      }
      sum += v;
      sumsq += v * v;
      count += 1.0;
    }
    if (count < 2.0)
      throw ValueError("feature " + std::to_string(j) +
                       " has fewer than two values to standardize on");
    means[j] = sum / count;
    const double var = std::max(sumsq / count - means[j] * means[j], 0.0);
    stds[j] = std::sqrt(var);
    if (!(stds[j] > 0.0))
      throw ValueError("feature " + std::to_string(j) +
                       " is constant; cannot standardize");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (data.x_full) (*data.x_full)[i][j] = ((*data.x_full)[i][j] - means[j]) / stds[j];
      if (data.mask[i][j] == 1.0)
        data.x_obs[i][j] = (data.x_obs[i][j] - means[j]) / stds[j];
      else
        data.x_obs[i][j] = 0.0;  // zero-imputation convention survives the affine map
    }
  }
  data.feature_means = std::move(means);
  data.feature_stds = std::move(stds);
  data.standardized = true;
}

double destandardize_value(const MaskedDataset& data, std::size_t j, double v) {
  if (!data.standardized) return v;
  return v * data.feature_stds[j] + data.feature_means[j];
}

std::vector<std::size_t> first_half_features(std::size_t p) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < (p + 1) / 2; ++j) out.push_back(j);
  return out;
}

Matrix mnar_threshold_mask(const Matrix& x_full,
                           const std::vector<std::size_t>& affected,
                           double offset) {
  const std::size_t n = x_full.size();
  const std::size_t p = n ? x_full.front().size() : 0;
  std::vector<double> mean(p, 0.0), std(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += x_full[i][j];
      sumsq += x_full[i][j] * x_full[i][j];
    }
    mean[j] = sum / static_cast<double>(n);
    std[j] = std::sqrt(
        std::max(sumsq / static_cast<double>(n) - mean[j] * mean[j], 0.0));
  }
  std::vector<bool> hit(p, false);
  for (std::size_t j : affected) {
    if (j >= p)
      throw ValueError("affected feature index " + std::to_string(j) +
                       " out of range for p = " + std::to_string(p));
    hit[j] = true;
  }
  Matrix mask(n, std::vector<double>(p, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (hit[j] && x_full[i][j] > mean[j] + offset * std[j]) mask[i][j] = 0.0;
  return mask;
}

Matrix mnar_logistic_mask(const Matrix& x_full, double w, double b,
                          RngStream& rng) {
  const std::size_t n = x_full.size();
  const std::size_t p = n ? x_full.front().size() : 0;
  Matrix mask(n, std::vector<double>(p, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double logit = w * (x_full[i][j] - b);
      const double e = std::exp(-std::fabs(logit));
      const double prob_obs = logit >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      mask[i][j] = rng.uniform() < prob_obs ? 1.0 : 0.0;
    }
  }
  return mask;
}

Matrix mcar_mask(std::size_t n, std::size_t p, double rate, RngStream& rng) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw ValueError("mcar rate must be in [0, 1], got " + std::to_string(rate));
  Matrix mask(n, std::vector<double>(p, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      mask[i][j] = rng.uniform() < rate ? 0.0 : 1.0;
  return mask;
}

Matrix sample_mvn(std::size_t n, const std::vector<double>& mean,
                  const Matrix& cov, RngStream& rng) {
  const std::size_t p = mean.size();
  if (cov.size() != p)
    throw ValueError("covariance does not match mean dimension");
  // Cholesky cov = L L^T
  Matrix L(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i) {
    if (cov[i].size() != p) throw ValueError("covariance must be square");
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (!(s > 0.0))
          throw ValueError("covariance is not positive definite");
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  Matrix out(n, std::vector<double>(p, 0.0));
  std::vector<double> eps(p);
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(eps.data(), p);
    for (std::size_t r = 0; r < p; ++r) {
      double v = mean[r];
      for (std::size_t c = 0; c <= r; ++c) v += L[r][c] * eps[c];
      out[i][r] = v;
    }
  }
  return out;
}

Tensor zero_impute(const MaskedDataset& data) {
  const std::size_t n = data.n(), p = data.p();
  Tensor out(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      out.at(i, j) = data.mask[i][j] == 1.0 ? data.x_obs[i][j] : 0.0;
  return out;
}

Tensor mask_tensor(const MaskedDataset& data) {
  const std::size_t n = data.n(), p = data.p();
  Tensor out(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) out.at(i, j) = data.mask[i][j];
  return out;
}

}  // namespace notmiwae
