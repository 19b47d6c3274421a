#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "funnelctl/core.hpp"

namespace funnelctl::pipeline {

/// CSV writer: comma separator, header row, 17 significant digits,
/// deterministic column order.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw Error("cannot open for writing: " + path);
    }

    void header(const std::vector<std::string>& cols) {
        for (size_t i = 0; i < cols.size(); ++i) {
            if (i) out_ << ',';
            out_ << cols[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& vals) {
        char buf[32];
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i) out_ << ',';
            std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
            out_ << buf;
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

}  // namespace funnelctl::pipeline
