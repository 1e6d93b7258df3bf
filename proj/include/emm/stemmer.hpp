#pragma once

#include <string>
#include <string_view>

namespace emm {

// Porter stemmer (the classic reference behaviour, including its published
// departures bli->ble and logi->log). Words that are not pure lowercase
// ASCII letters pass through unchanged.
std::string porter_stem(std::string_view word);

}  // namespace emm
