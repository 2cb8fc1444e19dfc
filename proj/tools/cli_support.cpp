#include "cli_support.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace odl::cli {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool is_separator(const std::string& line) { return trim(line) == "#batch"; }

}  // namespace

BatchReader::BatchReader(std::istream& in) : in_(in) {
    std::string line;
    while (read_line(line)) {
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        if (is_separator(t)) {
            fail("expected the header 'y,x1,...,xp' before any '#batch' line");
        }
        const std::vector<std::string> cols = split(t, ',');
        if (cols.size() < 2 || trim(cols[0]) != "y") {
            fail("header must start with 'y' followed by at least one covariate");
        }
        for (std::size_t k = 1; k < cols.size(); ++k) {
            if (trim(cols[k]) != "x" + std::to_string(k)) {
                fail("header column " + std::to_string(k + 1) + " should be 'x" +
                     std::to_string(k) + "', found '" + trim(cols[k]) + "'");
            }
        }
        width_ = static_cast<Eigen::Index>(cols.size() - 1);
        return;
    }
    done_ = true;
}

bool BatchReader::read_line(std::string& line) {
    line_offset_ = offset_;
    if (!std::getline(in_, line)) {
        return false;
    }
    ++line_no_;
    offset_ += line.size() + 1;
    return true;
}

void BatchReader::fail(const std::string& what) const {
    throw InputError("line " + std::to_string(line_no_) + " (byte offset " +
                     std::to_string(line_offset_) + "): " + what);
}

std::optional<Batch> BatchReader::next() {
    if (done_ || !width_) {
        return std::nullopt;
    }
    const Eigen::Index p = *width_;
    std::vector<double> values;
    std::string line;
    bool any_line = false;
    bool separated = false;
    while (read_line(line)) {
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        any_line = true;
        if (is_separator(t)) {
            separated = true;
            break;
        }
        const std::vector<std::string> cells = split(t, ',');
        if (static_cast<Eigen::Index>(cells.size()) != p + 1) {
            fail("expected " + std::to_string(p + 1) + " fields, found " +
                 std::to_string(cells.size()));
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const std::string cell = trim(cells[k]);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                fail("field " + std::to_string(k + 1) + " is not a finite number: '" + cell + "'");
            }
            values.push_back(v);
        }
    }
    if (!separated) {
        done_ = true;
        // A trailing separator or trailing blank lines do not open a batch.
        if (!any_line && consumed_ > 0) {
            return std::nullopt;
        }
        if (!any_line && values.empty()) {
            return std::nullopt;
        }
    }
    const auto n = static_cast<Eigen::Index>(values.size()) / (p + 1);
    Batch batch;
    batch.X.resize(n, p);
    batch.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double* row = values.data() + i * (p + 1);
        batch.y[i] = row[0];
        for (Eigen::Index k = 0; k < p; ++k) {
            batch.X(i, k) = row[k + 1];
        }
    }
    ++consumed_;
    return batch;
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    if (t == "nan") {
        return std::nan("");
    }
    if (t == "inf") {
        return HUGE_VAL;
    }
    if (t == "-inf") {
        return -HUGE_VAL;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw InputError("not a number: '" + t + "'");
    }
    return v;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& cell : split(text, ',')) {
        out.push_back(parse_double(cell));
    }
    return out;
}

std::vector<std::int64_t> parse_index_list(const std::string& text) {
    std::vector<std::int64_t> out;
    for (const std::string& raw : split(text, ',')) {
        const std::string cell = trim(raw);
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
            throw InputError("not an integer: '" + cell + "'");
        }
        out.push_back(v);
    }
    return out;
}

namespace {

template <typename Writer>
void atomic_replace(const std::filesystem::path& path, Writer&& write) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        write(out);
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    atomic_replace(path, [&](std::ofstream& out) { out << content; });
}

void write_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    atomic_replace(path, [&](std::ofstream& out) {
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    });
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* const kRecordHeader =
    "batch_index,coord,lambda,beta_lasso,beta_debiased,se,ci_low,ci_high,p_value";

std::string format_record(const RecordRow& row) {
    std::string s = std::to_string(row.batch_index) + "," + std::to_string(row.coord);
    for (double v : {row.lambda, row.beta_lasso, row.beta_debiased, row.se, row.ci_low, row.ci_high,
                     row.p_value}) {
        s += ",";
        s += format_double(v);
    }
    return s;
}

std::vector<RecordRow> read_records(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError("records file is empty (no header)");
    }
    const std::vector<std::string> header = split(trim(line), ',');
    std::map<std::string, std::size_t> at;
    for (std::size_t k = 0; k < header.size(); ++k) {
        at[trim(header[k])] = k;
    }
    const std::vector<std::string> needed{"batch_index", "coord", "lambda",  "beta_lasso", "beta_debiased",
                                          "se",          "ci_low", "ci_high", "p_value"};
    for (const std::string& name : needed) {
        if (!at.count(name)) {
            throw InputError("records file lacks column '" + name + "'");
        }
    }
    std::vector<RecordRow> rows;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const std::vector<std::string> cells = split(trim(line), ',');
        if (cells.size() != header.size()) {
            throw InputError("records line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(cells.size()));
        }
        try {
            RecordRow r;
            auto num = [&](const char* name) { return parse_double(cells[at[name]]); };
            r.batch_index = parse_index_list(cells[at["batch_index"]]).front();
            r.coord = parse_index_list(cells[at["coord"]]).front();
            r.lambda = num("lambda");
            r.beta_lasso = num("beta_lasso");
            r.beta_debiased = num("beta_debiased");
            r.se = num("se");
            r.ci_low = num("ci_low");
            r.ci_high = num("ci_high");
            r.p_value = num("p_value");
            rows.push_back(r);
        } catch (const InputError& e) {
            throw InputError("records line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

double normalized_auc(const std::vector<std::int64_t>& batch_index,
                      const std::vector<double>& p_values) {
    if (batch_index.size() != p_values.size()) {
        throw std::invalid_argument("normalized_auc: length mismatch");
    }
    if (batch_index.empty()) {
        return 0.0;
    }
    auto height = [](double p) { return -std::log10(std::max(p, kPValueFloor)); };
    if (batch_index.size() == 1) {
        return height(p_values.front());
    }
    double area = 0.0;
    for (std::size_t k = 1; k < batch_index.size(); ++k) {
        const double width = static_cast<double>(batch_index[k] - batch_index[k - 1]);
        if (!(width > 0.0)) {
            throw std::invalid_argument("normalized_auc: batch indices must increase");
        }
        area += 0.5 * width * (height(p_values[k - 1]) + height(p_values[k]));
    }
    return area / static_cast<double>(batch_index.back() - batch_index.front());
}

}  // namespace odl::cli
