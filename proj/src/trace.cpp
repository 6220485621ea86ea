#include "memsim/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "memsim/errors.hpp"

namespace memsim {

void TraceSet::add_signal(std::string name) {
    names_.push_back(std::move(name));
    data_.emplace_back();
}

bool TraceSet::has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& TraceSet::signal(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return data_[i];
    std::string msg = "unknown signal '" + name + "'; available:";
    for (const std::string& s : available()) msg += " " + s;
    throw EvalError(msg);
}

std::vector<std::string> TraceSet::available() const {
    std::vector<std::string> out;
    out.push_back("time");
    out.insert(out.end(), names_.begin(), names_.end());
    for (const MemristorProbe& m : memristors) {
        out.push_back("r(" + m.name + ")");
        if (!has("x(" + m.name + ")")) out.push_back("x(" + m.name + ")");
    }
    return out;
}

std::vector<double> TraceSet::probe(const std::string& selector) const {
    if (selector == "time") return time;
    if (selector == "v(0)") return std::vector<double>(time.size(), 0.0); // ground
    if (has(selector)) return signal(selector);

    // derived selectors backed by a memristor probe
    auto inner = [&](const char* prefix) -> std::string {
        std::string p(prefix);
        if (selector.size() > p.size() + 1 && selector.rfind(p, 0) == 0 &&
            selector.back() == ')')
            return selector.substr(p.size(), selector.size() - p.size() - 1);
        return {};
    };
    std::string rname = inner("r(");
    std::string xname = inner("x(");
    const std::string& name = !rname.empty() ? rname : xname;
    if (!name.empty()) {
        for (const MemristorProbe& m : memristors) {
            if (m.name != name) continue;
            std::vector<double> x = signal(m.x_signal);
            if (!rname.empty()) {
                for (double& v : x) v = m.r_off - (m.r_off - m.r_on) * v;
            }
            return x;
        }
    }

    std::string msg = "unknown selector '" + selector + "'; available:";
    for (const std::string& s : available()) msg += " " + s;
    throw EvalError(msg);
}

std::string format_csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void TraceSet::write_csv(std::ostream& os, const std::vector<std::string>& selectors) const {
    std::vector<std::string> cols = selectors;
    if (cols.empty()) cols = names_;

    std::vector<std::vector<double>> series;
    series.reserve(cols.size());
    for (const std::string& c : cols) series.push_back(probe(c));

    os << "time";
    for (const std::string& c : cols) os << ',' << c;
    os << '\n';
    for (size_t r = 0; r < time.size(); ++r) {
        os << format_csv_number(time[r]);
        for (const auto& s : series) os << ',' << format_csv_number(s[r]);
        os << '\n';
    }
}

} // namespace memsim
