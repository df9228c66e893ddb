import sys

from dotenv import load_dotenv

# AMC_LOG_LEVEL and friends may live in .env
load_dotenv()

from amc_cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
