#include "stvc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stvc/errors.hpp"

namespace stvc {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

double parse_double(const std::string& field, const std::filesystem::path& path, std::size_t line,
                    const std::string& column) {
  if (field.empty()) throw InputError(where(path, line) + ": missing value in column " + column);
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw InputError(where(path, line) + ": cannot parse '" + field + "' in column " + column);
  if (!std::isfinite(v))
    throw InputError(where(path, line) + ": missing or non-finite value in column " + column);
  return v;
}

int parse_int(const std::string& field, const std::filesystem::path& path, std::size_t line,
              const std::string& column) {
  if (field.empty()) throw InputError(where(path, line) + ": missing value in column " + column);
  int v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw InputError(where(path, line) + ": expected an integer, got '" + field + "' in column " + column);
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

Dataset read_dataset_csv(const std::filesystem::path& path, const CsvReadOptions& options) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!next_line(in, line)) throw InputError(where(path, 1) + ": missing header row");
  const std::vector<std::string> header = split(line);

  auto find = [&](const std::string& name) -> long {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h != "s1" && h != "s2" && h != "t" && h != "y" && h != "trials" && h.rfind("x_", 0) != 0)
      throw InputError(where(path, 1) + ": unknown column '" + h + "'");
    if (std::count(header.begin(), header.end(), h) > 1)
      throw InputError(where(path, 1) + ": duplicate column '" + h + "'");
  }
  const long c_s1 = find("s1"), c_s2 = find("s2"), c_t = find("t"), c_y = find("y"),
             c_trials = find("trials");
  if (c_s1 < 0 || c_s2 < 0 || c_t < 0) throw InputError(where(path, 1) + ": columns s1, s2, t are required");
  if (c_y < 0 && options.require_response) throw InputError(where(path, 1) + ": column y is required");
  if (options.family == Family::Binomial && c_trials < 0)
    throw InputError(where(path, 1) + ": binomial data need a trials column");
  if (options.family == Family::Poisson && c_trials >= 0)
    throw InputError(where(path, 1) + ": trials column given for Poisson data");

  std::vector<std::string> predictors = options.predictors;
  if (predictors.empty())
    for (const auto& h : header)
      if (h.rfind("x_", 0) == 0) predictors.push_back(h.substr(2));
  if (predictors.empty()) throw InputError(where(path, 1) + ": no predictor columns");
  std::vector<long> c_x;
  for (const auto& p : predictors) {
    const long c = find("x_" + p);
    if (c < 0) throw InputError(where(path, 1) + ": predictor column x_" + p + " not found");
    c_x.push_back(c);
  }
  std::vector<int> varying;
  const std::vector<std::string>& vnames = options.varying.empty() ? predictors : options.varying;
  for (const auto& v : vnames) {
    auto it = std::find(predictors.begin(), predictors.end(), v);
    if (it == predictors.end()) throw ConfigError("varying coefficient '" + v + "' is not a predictor");
    varying.push_back(static_cast<int>(it - predictors.begin()));
  }

  Dataset d;
  d.family.kind = options.family;
  d.varying_cols = varying;
  d.names = predictors;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) {
      // Trailing blank lines are allowed; anything after them is not.
      std::string rest;
      while (next_line(in, rest)) {
        ++lineno;
        if (!rest.empty()) throw InputError(where(path, lineno) + ": data after a blank line");
      }
      break;
    }
    const auto f = split(line);
    if (f.size() != header.size())
      throw InputError(where(path, lineno) + ": expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(f.size()));
    auto field = [&](long c) { return f[static_cast<std::size_t>(c)]; };
    auto col = [&](long c) { return header[static_cast<std::size_t>(c)]; };
    SpaceTimeCoord sc;
    sc.s[0] = parse_double(field(c_s1), path, lineno, "s1");
    sc.s[1] = parse_double(field(c_s2), path, lineno, "s2");
    sc.t = parse_double(field(c_t), path, lineno, "t");
    d.coords.push_back(sc);
    const int y = c_y >= 0 ? parse_int(field(c_y), path, lineno, "y") : 0;
    if (y < 0) throw InputError(where(path, lineno) + ": negative response");
    int trials = 1;
    if (c_trials >= 0) {
      trials = parse_int(field(c_trials), path, lineno, "trials");
      if (trials < 1) throw InputError(where(path, lineno) + ": trials must be at least 1");
      if (y > trials) throw InputError(where(path, lineno) + ": response exceeds trials");
    }
    d.y.push_back(y);
    d.family.trials.push_back(trials);
    std::vector<double> xr;
    for (long c : c_x) xr.push_back(parse_double(field(c), path, lineno, col(c)));
    rows.push_back(std::move(xr));
  }
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(predictors.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < predictors.size(); ++j)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return d;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ostringstream out;
  const bool binomial = data.family.kind == Family::Binomial;
  out << "s1,s2,t,y";
  if (binomial) out << ",trials";
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    out << ",x_" << (ju < data.names.size() ? data.names[ju] : "x" + std::to_string(j));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const auto& c = data.coords[iu];
    out << format_double(c.s[0]) << ',' << format_double(c.s[1]) << ',' << format_double(c.t) << ','
        << data.y[iu];
    if (binomial) out << ',' << data.family.trials[iu];
    for (Eigen::Index j = 0; j < data.p(); ++j) out << ',' << format_double(data.X(i, j));
    out << '\n';
  }
  write_text(path, out.str());
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M,
                      const std::vector<std::string>& header) {
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format_double(M(i, j));
    out << '\n';
  }
  write_text(path, out.str());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
  std::ifstream in = open_in(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (lineno == 1 && !f.empty()) {
      double probe = 0.0;
      auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), probe);
      if (ec != std::errc() || ptr != f[0].data() + f[0].size()) {
        if (header) *header = f;
        width = f.size();
        continue;
      }
    }
    if (width == 0) width = f.size();
    if (f.size() != width) throw InputError(where(path, lineno) + ": ragged row");
    std::vector<double> r;
    for (std::size_t j = 0; j < f.size(); ++j) r.push_back(parse_double(f[j], path, lineno, std::to_string(j)));
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace stvc
