from src import cli


def main() -> int:
    """
    Run the command line

    :return: The exit code
    """
    return cli.main()


if __name__ == "__main__":
    raise SystemExit(main())
