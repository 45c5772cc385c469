#pragma once

#include "calibra/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace calibra::cli {

enum ExitCode : int { ok = 0, usage = 2, numeric = 3, verify_failed = 4 };

// args excludes the program name
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// header row required; numeric cells only, '.' as decimal separator regardless of locale
Dataset read_csv(const std::string& path, Arm arm, OutcomeType type);
Dataset parse_csv(const std::string& text, Arm arm, OutcomeType type, const std::string& source = "<text>");

// "age=4,smoking=dag3" -> roles
std::map<std::string, DagRole> parse_roles(const std::vector<std::string>& items);

std::uint64_t fnv1a64(const std::string& s);

// %.4g style
std::string sig4(double v);

}
