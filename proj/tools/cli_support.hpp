// Input parsing, output formatting and file helpers behind the odl command.
#ifndef ODL_TOOLS_CLI_SUPPORT_HPP_
#define ODL_TOOLS_CLI_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "odl/batch.hpp"
#include "odl/inference.hpp"

namespace odl::cli {

/// Malformed input. The message names the line and byte offset.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/**
 * Reads the batch stream format one batch at a time:
 *
 *   y,x1,...,xp      header, first non-blank line
 *   0,0.3,...        rows of batch 1
 *   #batch           separator
 *   1,-1.2,...       rows of batch 2
 *
 * Blank lines are ignored. A file without any line is an empty stream.
 */
class BatchReader {
  public:
    explicit BatchReader(std::istream& in);

    /// Number of covariates, or nullopt for an empty stream.
    std::optional<Eigen::Index> width() const { return width_; }

    /// Next batch, or nullopt at end of input. Batches may be empty when two
    /// separators are adjacent.
    std::optional<Batch> next();

    /// Batches returned so far.
    std::int64_t consumed() const { return consumed_; }

  private:
    bool read_line(std::string& line);
    [[noreturn]] void fail(const std::string& what) const;

    std::istream& in_;
    std::optional<Eigen::Index> width_;
    std::int64_t line_no_ = 0;
    std::uint64_t line_offset_ = 0;
    std::uint64_t offset_ = 0;
    bool done_ = false;
    std::int64_t consumed_ = 0;
};

/// Shortest text that parses back to the same double ("%.17g"); nan and
/// inf print as "nan", "inf", "-inf".
std::string format_double(double v);

/// Parses a number written by format_double (also accepts nan and inf).
double parse_double(const std::string& text);

/// Comma-separated list of numbers or integers.
std::vector<double> parse_number_list(const std::string& text);
std::vector<std::int64_t> parse_index_list(const std::string& text);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// One row of a records file.
struct RecordRow {
    std::int64_t batch_index = 0;
    std::int64_t coord = 0;
    double lambda = 0.0;
    double beta_lasso = 0.0;
    double beta_debiased = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 0.0;
};

extern const char* const kRecordHeader;

std::string format_record(const RecordRow& row);

/// Parses a records CSV. Columns are located by name; a missing column is an
/// InputError naming it.
std::vector<RecordRow> read_records(std::istream& in);

/// Area under the -log10 p trace by the trapezoid rule over batch index,
/// divided by the index span. p-values are floored at kPValueFloor first. A
/// single point returns its own height; an empty trace returns 0.
double normalized_auc(const std::vector<std::int64_t>& batch_index,
                      const std::vector<double>& p_values);

}  // namespace odl::cli

#endif  // ODL_TOOLS_CLI_SUPPORT_HPP_
