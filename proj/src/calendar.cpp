#include "ppolicy/calendar.hpp"

// Header-only; this TU anchors the module in the library.
