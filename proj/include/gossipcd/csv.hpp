#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "gossipcd/error.hpp"

namespace gossipcd {

// Formats a double with 17 significant digits so CSV output round-trips
// bit-exactly; infinities are spelled "inf"/"-inf".
inline std::string format_double(double x) {
    if (x == std::numeric_limits<double>::infinity()) return "inf";
    if (x == -std::numeric_limits<double>::infinity()) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary) {
        if (!out_) fail(errc::io_error, "cannot open " + path + " for writing");
        write_row_(header);
    }

    void row(const std::vector<std::string>& cells) { write_row_(cells); }

    // Convenience cell builders.
    static std::string cell(double x) { return format_double(x); }
    static std::string cell(long long x) { return std::to_string(x); }
    static std::string cell(unsigned long long x) { return std::to_string(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(std::size_t x) { return std::to_string(x); }
    static std::string cell(const std::string& s) { return s; }

private:
    void write_row_(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
};

} // namespace gossipcd
