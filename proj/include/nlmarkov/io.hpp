#pragma once

// CSV and number formatting shared by report writers. Floats are printed with
// 17 significant digits and '.' decimal so artifacts round-trip losslessly
// and reruns are byte-identical.

#include <cstdio>
#include <string>
#include <vector>

#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

inline std::string format_double(Scalar x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<Scalar>& row) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += format_double(row[i]);
        }
        rows_.push_back(std::move(line));
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += '\n';
        for (const auto& r : rows_) {
            out += r;
            out += '\n';
        }
        return out;
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

}  // namespace nlmarkov
