#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stvc/errors.hpp"
#include "stvc/model.hpp"

namespace stvc {

// Unreadable or unwritable files. Schema problems are InputError.
class IoError : public Error {
 public:
  using Error::Error;
};

struct CsvReadOptions {
  Family family = Family::Poisson;
  // Predictor columns (without the x_ prefix). Empty: every x_ column in file order.
  std::vector<std::string> predictors;
  // Varying-coefficient columns, a subset of predictors. Empty: all predictors.
  std::vector<std::string> varying;
  // When false the y column may be absent; responses are then set to 0.
  bool require_response = true;
};

// Columns s1,s2,t,y[,trials],x_<name>... with a header row. Binomial data
// require trials. Missing or malformed fields throw InputError naming the line.
Dataset read_dataset_csv(const std::filesystem::path& path, const CsvReadOptions& options);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

// Shortest representation that reads back to the same double.
std::string format_double(double v);

// Plain numeric matrix with an optional header row.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M,
                      const std::vector<std::string>& header = {});

// Reads a numeric matrix written by write_matrix_csv; the header row, if
// present, is returned through `header`.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stvc
