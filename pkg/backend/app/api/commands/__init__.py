# CLI sub-commands and their exit codes
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2
