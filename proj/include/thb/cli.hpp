#pragma once

namespace thb {

/// Command line entry point: run, uniform, check-mesh, report. Returns 0 on
/// success, 1 on runtime failure, 2 on usage errors.
int cli_main(int argc, char** argv);

}  // namespace thb
