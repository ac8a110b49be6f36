#include "fedsa/metrics.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace fedsa {

namespace {

std::string cell(const std::optional<double> &v) {
    return v ? format_double(*v) : std::string{};
}

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_double(const std::string &text, std::size_t line_no) {
    char *end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw IoFailure("line " + std::to_string(line_no) + ": bad number '" + text + "'");
    return v;
}

std::optional<double> parse_optional(const std::string &text, std::size_t line_no) {
    if (text.empty())
        return std::nullopt;
    return parse_double(text, line_no);
}

std::int64_t parse_int(const std::string &text, std::size_t line_no) {
    char *end = nullptr;
    const long long v = std::strtoll(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
        throw IoFailure("line " + std::to_string(line_no) + ": bad integer '" + text + "'");
    return v;
}

} // namespace

std::string format_double(double value) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::vector<std::string> CsvLayout::header() const {
    std::vector<std::string> cols{"round", "global_step"};
    if (kind == TaskKind::Regression) {
        cols.insert(cols.end(), {"T_n", "param_error", "agg_grad_norm"});
        for (std::size_t i = 1; i <= clients; ++i)
            cols.push_back("grad_norm_c" + std::to_string(i));
        cols.insert(cols.end(), {"delta_wbar", "tracking_error"});
    } else {
        cols.insert(cols.end(), {"train_loss", "train_acc", "test_loss", "test_acc",
                                 "rare_class_acc", "delta_wbar"});
    }
    for (std::size_t j = 1; j <= wbar_dim; ++j)
        cols.push_back("wbar_" + std::to_string(j));
    return cols;
}

void write_csv(std::span<const MetricsRecord> records, const CsvLayout &layout,
               std::ostream &out) {
    const auto cols = layout.header();
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << (c ? "," : "") << cols[c];
    out << '\n';

    for (const auto &r : records) {
        std::vector<std::string> row{std::to_string(r.round), std::to_string(r.global_step)};
        if (layout.kind == TaskKind::Regression) {
            row.push_back(cell(r.T_n));
            row.push_back(cell(r.param_error));
            row.push_back(cell(r.agg_grad_norm));
            for (std::size_t i = 0; i < layout.clients; ++i)
                row.push_back(i < r.client_grad_norms.size() ? format_double(r.client_grad_norms[i])
                                                             : std::string{});
            row.push_back(cell(r.delta_wbar));
            row.push_back(cell(r.tracking_error));
        } else {
            row.push_back(cell(r.train_loss));
            row.push_back(cell(r.train_acc));
            row.push_back(cell(r.test_loss));
            row.push_back(cell(r.test_acc));
            row.push_back(cell(r.rare_class_acc));
            row.push_back(cell(r.delta_wbar));
        }
        for (std::size_t j = 0; j < layout.wbar_dim; ++j)
            row.push_back(j < r.w_bar.size() ? format_double(r.w_bar[j]) : std::string{});
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << row[c];
        out << '\n';
    }
}

void write_csv(std::span<const MetricsRecord> records, const CsvLayout &layout,
               const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoFailure("cannot open " + path.string() + " for writing");
    write_csv(records, layout, out);
    out.flush();
    if (!out)
        throw IoFailure("write to " + path.string() + " failed");
}

CsvTable read_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line))
        throw IoFailure("missing CSV header");
    const auto cols = split(line);

    CsvTable table;
    auto &layout = table.layout;
    bool has_t = false, has_train = false;
    for (const auto &c : cols) {
        has_t |= c == "T_n";
        has_train |= c == "train_loss";
        if (c.rfind("grad_norm_c", 0) == 0)
            ++layout.clients;
        if (c.rfind("wbar_", 0) == 0)
            ++layout.wbar_dim;
    }
    if (has_t == has_train)
        throw IoFailure("unrecognised metrics header");
    layout.kind = has_t ? TaskKind::Regression : TaskKind::Classification;
    if (layout.header() != cols)
        throw IoFailure("metrics header columns out of order");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto f = split(line);
        if (f.size() != cols.size())
            throw IoFailure("line " + std::to_string(line_no) + ": wrong column count");
        MetricsRecord r;
        std::size_t c = 0;
        r.round = parse_int(f[c++], line_no);
        r.global_step = parse_int(f[c++], line_no);
        if (layout.kind == TaskKind::Regression) {
            r.T_n = parse_optional(f[c++], line_no);
            r.param_error = parse_optional(f[c++], line_no);
            r.agg_grad_norm = parse_optional(f[c++], line_no);
            for (std::size_t i = 0; i < layout.clients; ++i) {
                const auto v = parse_optional(f[c++], line_no);
                if (v)
                    r.client_grad_norms.push_back(*v);
            }
            r.delta_wbar = parse_optional(f[c++], line_no);
            r.tracking_error = parse_optional(f[c++], line_no);
        } else {
            r.train_loss = parse_optional(f[c++], line_no);
            r.train_acc = parse_optional(f[c++], line_no);
            r.test_loss = parse_optional(f[c++], line_no);
            r.test_acc = parse_optional(f[c++], line_no);
            r.rare_class_acc = parse_optional(f[c++], line_no);
            r.delta_wbar = parse_optional(f[c++], line_no);
        }
        for (std::size_t j = 0; j < layout.wbar_dim; ++j) {
            const auto v = parse_optional(f[c++], line_no);
            if (v)
                r.w_bar.push_back(*v);
        }
        table.records.push_back(std::move(r));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot open " + path.string());
    return read_csv(in);
}

} // namespace fedsa
