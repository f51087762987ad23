#include "tic/field_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "tic/errors.hpp"

namespace tic {

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_theta_csv(const ThetaField& theta, std::ostream& os) {
    const auto& t = theta.times();
    const auto& g = theta.space();
    const int N = theta.steps();
    os << "t_index,s_index,x_index,t,s,x,theta\n";
    for (int i = 0; i <= N; ++i)
        for (int j = i; j <= N; ++j) {
            const auto sl = theta.slice(i, j);
            for (int k = 0; k < g.nodes; ++k)
                os << i << ',' << j << ',' << k << ',' << format_number(t[i]) << ','
                   << format_number(t[j]) << ',' << format_number(g.x(k)) << ','
                   << format_number(sl[k]) << '\n';
        }
}

void write_scalar_csv(const ScalarField& f, const std::string& name, std::ostream& os) {
    const auto& g = f.space();
    os << "s_index,x_index,s,x," << name << '\n';
    for (int j = 0; j < f.rows(); ++j)
        for (int k = 0; k < g.nodes; ++k)
            os << j << ',' << k << ',' << format_number(f.times()[j]) << ',' << format_number(g.x(k))
               << ',' << format_number(f.at(j, k)) << '\n';
}

void write_strategy_csv(const FeedbackStrategy& psi, std::ostream& os) {
    const auto& g = psi.space();
    os << "s_index,x_index,s,x";
    for (int c = 0; c < psi.control_dim(); ++c) os << ",u" << c;
    os << '\n';
    for (int j = 0; j < psi.steps(); ++j)
        for (int k = 0; k < g.nodes; ++k) {
            os << j << ',' << k << ',' << format_number(psi.times()[j]) << ',' << format_number(g.x(k));
            const Vec& u = psi.at(j, k);
            for (int c = 0; c < u.size(); ++c) os << ',' << format_number(u(c));
            os << '\n';
        }
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    os.write(b, sizeof(T));
}

template <class T>
T get(std::istream& is) {
    char b[sizeof(T)];
    if (!is.read(b, sizeof(T))) throw DomainError("truncated THF1 stream");
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

constexpr std::uint16_t kVersion = 1;

}  // namespace

void write_theta_binary(const ThetaField& theta, std::ostream& os) {
    os.write("THF1", 4);
    put<std::uint16_t>(os, kVersion);
    put<std::uint16_t>(os, static_cast<std::uint16_t>(theta.space().dim));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(theta.times().size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(theta.space().nodes));
    for (double t : theta.times()) put(os, t);
    put(os, theta.space().x_lo);
    put(os, theta.space().x_hi);
    for (double v : theta.raw()) put(os, v);
}

ThetaField read_theta_binary(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "THF1", 4) != 0) throw DomainError("not a THF1 stream");
    const auto version = get<std::uint16_t>(is);
    if (version != kVersion) throw DomainError("unsupported THF1 version");
    const auto dim = get<std::uint16_t>(is);
    if (dim != 1) throw UnsupportedError("THF1 stream with state dimension other than 1");
    const auto nt = get<std::uint32_t>(is);
    const auto nx = get<std::uint32_t>(is);
    std::vector<double> times(nt);
    for (auto& t : times) t = get<double>(is);
    const double lo = get<double>(is), hi = get<double>(is);
    ThetaField f(std::move(times), SpatialGrid(lo, hi, static_cast<int>(nx)));
    for (auto& v : f.raw()) v = get<double>(is);
    return f;
}

}  // namespace tic
