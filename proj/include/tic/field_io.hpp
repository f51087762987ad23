#pragma once

#include <iosfwd>
#include <string>

#include "tic/grids.hpp"

namespace tic {

// shortest decimal string that parses back to the same double
std::string format_number(double v);

// columns: t_index,s_index,x_index,t,s,x,theta
void write_theta_csv(const ThetaField& theta, std::ostream& os);
// columns: s_index,x_index,s,x,<name>
void write_scalar_csv(const ScalarField& f, const std::string& name, std::ostream& os);
// columns: s_index,x_index,s,x,u0[,u1...]; row j is the control on [s_j, s_{j+1})
void write_strategy_csv(const FeedbackStrategy& psi, std::ostream& os);

// 16-byte header: "THF1", u16 version, u16 state dim, u32 time points,
// u32 space nodes; then the time grid, x_lo, x_hi and the triangle values
void write_theta_binary(const ThetaField& theta, std::ostream& os);
ThetaField read_theta_binary(std::istream& is);

}  // namespace tic
