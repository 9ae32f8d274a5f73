#pragma once

#include <string>

#include <json.hpp>

#include "condind/distribution.hpp"
#include "condind/witness.hpp"

namespace cind {

using json = nlohmann::json;

// Raw grid from JSON {"rows","cols","p"} or CSV rows; throws ParseError.
Matrix parse_matrix(const std::string& text);
Matrix read_matrix_file(const std::string& path);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json witness_to_json(const DerivationWitness& w);
DerivationWitness witness_from_json(const json& j);
DerivationWitness read_witness_file(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace cind
