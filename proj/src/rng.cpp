#include "srft/rng.hpp"

// Header-only; this TU exists so the target has a home for the header in
// compile_commands and any future out-of-line additions.
