#pragma once

// Comma-separated output with a header row and 17 significant digits.

#include "tde_plankton/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>

namespace tde_plankton::app {

[[nodiscard]] inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header) : out_(path) {
        if (!out_) throw Error(ErrorKind::Config, "cannot write " + path.string());
        bool first = true;
        for (auto h : header) {
            out_ << (first ? "" : ",") << h;
            first = false;
        }
        out_ << '\n';
    }

    CsvWriter& cell(double v) {
        sep();
        out_ << format_double(v);
        return *this;
    }
    CsvWriter& cell(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& cell(std::string_view v) {
        sep();
        out_ << v;
        return *this;
    }
    void end_row() {
        out_ << '\n';
        fresh_ = true;
    }

private:
    void sep() {
        if (!fresh_) out_ << ',';
        fresh_ = false;
    }

    std::ofstream out_;
    bool fresh_ = true;
};

}  // namespace tde_plankton::app
