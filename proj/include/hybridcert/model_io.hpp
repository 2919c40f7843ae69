#ifndef HYBRIDCERT_MODEL_IO_HPP
#define HYBRIDCERT_MODEL_IO_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hybridcert/model.hpp"

namespace hybridcert {

// Human-readable system definition file. Matrices are written row-major with
// 17 significant digits, so save/load round-trips are lossless.
void save_system(std::ostream& os, const std::vector<SubsystemModel>& models,
                 const Interconnection& ic);
void save_system(const std::string& path, const std::vector<SubsystemModel>& models,
                 const Interconnection& ic);

std::pair<std::vector<SubsystemModel>, Interconnection> load_system(std::istream& is);
std::pair<std::vector<SubsystemModel>, Interconnection> load_system(const std::string& path);

std::string format_double(double v);  // %.17g

}  // namespace hybridcert

#endif  // HYBRIDCERT_MODEL_IO_HPP
