#pragma once

namespace qfedtd {

/// Exit codes: 0 success, 1 validation or usage error, 2 failed verification.
int cli_main(int argc, const char* const* argv);

}  // namespace qfedtd
