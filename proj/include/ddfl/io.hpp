#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ddfl/trajectories.hpp"

namespace ddfl {

// Trajectory CSV contract: header row `k,u_1..u_m,y_1..y_m`; one row per time
// index; rows past the input horizon carry empty input cells, and output
// channel i has exactly N + d_i filled cells. Column order is part of the
// contract. Numbers are written with 17 significant digits so values
// round-trip exactly.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

// Input-only CSV: header `k,u_1..u_m`.
void write_input_csv(const Eigen::MatrixXd& inputs, const std::string& path);
Eigen::MatrixXd read_input_csv(const std::string& path);

// Reference outputs in the trajectory CSV format (input cells may be empty);
// the structure supplies the relative degrees needed to split the horizon.
std::vector<Eigen::VectorXd> read_reference_csv(const std::string& path, const SystemStructure& structure);

// Per-channel simulation result: header `k,y_true,y_hat,abs_error,bound`.
void write_channel_csv(const std::string& path, const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_hat,
                       const Eigen::VectorXd& abs_error, const Eigen::VectorXd& bound, int lead);

std::string format_double(double v);  // %.17g
double parse_double(const std::string& cell);

// FNV-1a over a file's bytes; used to stamp reports with the config identity.
std::string file_hash_hex(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace ddfl
